//! Reflective hint mining and reinforcement-learned hint retrieval for
//! LLM-based session recommendation.
//!
//! The crate is organised along the pipeline:
//!
//! * [`data`] turns raw interaction logs into sessions, splits and candidate sets.
//! * [`llm`] renders prompts, talks to a chat backend (HTTP or simulated) and
//!   parses replies back into ranked item lists.
//! * [`reflection`] runs the three-turn self-reflection chain on missed sessions.
//! * [`kb`] admits reflected hints into a bounded knowledge base.
//! * [`encoder`] maps a session to a unit-norm state vector.
//! * [`agent`] is the linear-softmax retrieval policy and its PPO trainer.
//! * [`eval`] holds ranking metrics, ablation evaluation and significance tests.
//! * [`sim`] is a deterministic stand-in LLM used for offline closed-loop runs.

pub mod agent;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod kb;
pub mod llm;
pub mod recommender;
pub mod reflection;
pub mod seed;
pub mod sim;

pub use agent::{Policy, TrainConfig, Transition};
pub use data::{Catalog, CandidateSet, DatasetSplit, InteractionRecord, Item, Session};
pub use encoder::{EncoderSpec, StateVector};
pub use error::{Error, Result};
pub use eval::{EvalConfig, EvalReport, Metric, Variant};
pub use kb::{Hint, KnowledgeBase};
pub use llm::{ChatTurn, LlmGateway, LlmProfile, PromptText, RankedOutput};
pub use recommender::Recommender;
pub use reflection::ReflectionTrace;
pub use sim::{SimScenario, SimWorld};
