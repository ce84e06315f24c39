//! Deterministic simulated recommender LLM with planted error modes.
//!
//! Each generated session triggers one error mode. The simulated model misses
//! the target unless the prompt's hint carries that mode's tag, so the whole
//! mining, training and evaluation loop can run offline with a known optimum.

mod backend;
mod library;
mod world;

use serde::{Deserialize, Serialize};

pub use backend::SimulatedLlm;
pub use library::{ModeTemplate, DISTRACTOR_HINTS, MODE_LIBRARY};
pub use world::{
    generate_synthetic_world, generate_world, render_ranking, simulate_outcome, simulate_ranking,
    simulate_similarity_judge, ErrorMode, SimOutcome, SimScenario, SimWorld, TagPattern, Trigger, WorldConfig,
};

use crate::agent::{few_shot_subset, train_agent, ActionSelector, TrainConfig, TrainOutcome};
use crate::data::{split_dataset, DatasetSplit};
use crate::encoder::EncoderSpec;
use crate::error::Result;
use crate::eval::{evaluate, EvalConfig, EvalReport, Variant};
use crate::kb::{build_knowledge_base, KbBuildConfig, KbBuildOutcome};
use crate::llm::{Domain, LlmGateway, LlmProfile};
use crate::recommender::Recommender;

/// Gateway over a [`SimulatedLlm`] for `world`.
pub fn simulated_gateway(world: &SimWorld, profile: LlmProfile) -> Result<LlmGateway> {
    LlmGateway::new(SimulatedLlm::new(world), profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClosedLoopConfig {
    pub world: WorldConfig,
    pub split_seed: u64,
    pub kb: KbBuildConfig,
    pub few_shot: usize,
    pub train: TrainConfig,
    pub encoder: EncoderSpec,
    /// Base evaluation settings; `variant` is overridden per variant.
    pub eval: EvalConfig,
    pub variants: Vec<Variant>,
}

impl Default for ClosedLoopConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            split_seed: 0,
            kb: KbBuildConfig::default(),
            few_shot: 500,
            train: TrainConfig::default(),
            encoder: EncoderSpec::default(),
            eval: EvalConfig { runs: 1, ..EvalConfig::default() },
            variants: Variant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClosedLoopOutcome {
    pub world: SimWorld,
    pub split: DatasetSplit,
    pub kb: KbBuildOutcome,
    pub training: TrainOutcome,
    pub reports: Vec<EvalReport>,
}

/// Generate a world, mine a knowledge base on its training split, train the
/// retrieval agent on a few-shot subset, and evaluate the requested variants
/// on the test split.
pub fn run_closed_loop(cfg: &ClosedLoopConfig, profile: LlmProfile) -> Result<ClosedLoopOutcome> {
    let world = generate_world(&cfg.world)?;
    let split = split_dataset(&world.sessions, (7, 1, 2), cfg.split_seed)?;
    let gateway = simulated_gateway(&world, profile)?;
    let rec = Recommender::new(&gateway, &world.catalog, Domain::Movie);
    let kb = build_knowledge_base(&split.train, &world.catalog, &cfg.kb, &rec, &gateway)?;
    let few = few_shot_subset(&split.train, cfg.few_shot, cfg.train.seed);
    let training = train_agent(&few, &world.catalog, &kb.kb, &cfg.encoder, &rec, &cfg.train)?;
    let mut reports = Vec::with_capacity(cfg.variants.len());
    for &variant in &cfg.variants {
        let ecfg = EvalConfig { variant, ..cfg.eval.clone() };
        let selector: Option<&dyn ActionSelector> = (variant == Variant::Agent).then_some(&training.policy as _);
        reports.push(evaluate(&split.test, &world.catalog, Some(&kb.kb), selector, &cfg.encoder, &rec, &ecfg)?);
    }
    Ok(ClosedLoopOutcome { world, split, kb, training, reports })
}
