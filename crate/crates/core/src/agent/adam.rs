use serde::{Deserialize, Serialize};

use super::Policy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam step that *ascends* along `gradient`.
pub fn update_policy(policy: &mut Policy, gradient: &[f64], state: &mut AdamState, learning_rate: f64) -> Result<()> {
    let weights = policy.weights_mut();
    if gradient.len() != weights.len() || state.m.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), got: gradient.len() });
    }
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..weights.len() {
        let g = gradient[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        weights[i] += learning_rate * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}
