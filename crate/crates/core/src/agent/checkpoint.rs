use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Policy, TrainConfig};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;

/// On-disk form of a trained policy, bound to the knowledge base it was
/// trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub d: usize,
    pub num_actions: usize,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub kb_fingerprint: String,
    pub config: TrainConfig,
    pub episodes_trained: usize,
}

impl PolicyCheckpoint {
    pub fn new(policy: &Policy, kb: &KnowledgeBase, config: &TrainConfig, episodes_trained: usize) -> Self {
        Self {
            d: policy.dim(),
            num_actions: policy.num_actions(),
            w: policy.rows(),
            kb_fingerprint: kb.fingerprint(),
            config: config.clone(),
            episodes_trained,
        }
    }

    pub fn policy(&self) -> Result<Policy> {
        let policy = Policy::from_rows(self.w.clone())?;
        if policy.num_actions() != self.num_actions || policy.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.num_actions * self.d,
                got: policy.num_actions() * policy.dim(),
            });
        }
        Ok(policy)
    }

    /// Fails unless `kb` is the knowledge base the policy was trained on.
    pub fn check_kb(&self, kb: &KnowledgeBase) -> Result<()> {
        let got = kb.fingerprint();
        if got != self.kb_fingerprint {
            return Err(Error::FingerprintMismatch { expected: self.kb_fingerprint.clone(), got });
        }
        if self.num_actions != kb.len() + 1 {
            return Err(Error::DimensionMismatch { expected: kb.len() + 1, got: self.num_actions });
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Load and validate against `kb`.
    pub fn load(path: impl AsRef<Path>, kb: &KnowledgeBase) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let ckpt: PolicyCheckpoint = serde_json::from_slice(&bytes)?;
        ckpt.check_kb(kb)?;
        ckpt.policy()?;
        Ok(ckpt)
    }
}
