use serde::{Deserialize, Serialize};

use super::{action_distribution, kl_divergence, Policy, Transition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    /// KL penalty coefficient.
    pub beta: f64,
    /// Subtracted from every reward to form the advantage.
    pub baseline: f64,
    pub weight_decay: f64,
    /// Optional ratio clip range (e.g. 0.2).
    pub clip: Option<f64>,
}

/// Importance-weighted one-step surrogate with a KL penalty:
///
/// ```text
/// J(W) = mean_i[ rho_i * (r_i - b) ] - beta * mean_i KL(pi_old(.|z_i) || pi_W(.|z_i)) - (lambda/2) |W|^2
/// rho_i = pi_W(a_i|z_i) / pi_old(a_i|z_i)
/// ```
///
/// Returns `J` and its exact gradient with respect to `W` (row-major, same
/// shape as the policy weights).
pub fn policy_objective_and_gradient(
    policy: &Policy,
    old_policy: &Policy,
    batch: &[Transition],
    params: &SurrogateParams,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if policy.num_actions() != old_policy.num_actions() || policy.dim() != old_policy.dim() {
        return Err(Error::DimensionMismatch {
            expected: policy.num_actions() * policy.dim(),
            got: old_policy.num_actions() * old_policy.dim(),
        });
    }
    let (n_act, dim) = (policy.num_actions(), policy.dim());
    let inv_n = 1.0 / batch.len() as f64;
    let mut objective = 0.0;
    let mut grad = vec![0.0; n_act * dim];

    for t in batch {
        if t.action >= n_act {
            return Err(Error::invalid(format!("action {} out of range", t.action)));
        }
        let new = action_distribution(policy, &t.z)?;
        let old = action_distribution(old_policy, &t.z)?;
        let old_a = old[t.action];
        if old_a <= 0.0 {
            return Err(Error::ZeroOldProbability(t.action));
        }
        let advantage = t.reward - params.baseline;
        let ratio = new[t.action] / old_a;

        let (term, active) = match params.clip {
            Some(c) => {
                let clipped = ratio.clamp(1.0 - c, 1.0 + c);
                let (u, v) = (ratio * advantage, clipped * advantage);
                if v < u { (v, false) } else { (u, true) }
            }
            None => (ratio * advantage, true),
        };
        objective += inv_n * (term - params.beta * kl_divergence(&old, &new)?);

        // d rho / d W_j = rho * (1[j = a] - pi_j) z
        let surrogate_scale = if active { inv_n * advantage * ratio } else { 0.0 };
        for j in 0..n_act {
            let indicator = if j == t.action { 1.0 } else { 0.0 };
            // d(-beta KL)/dW_j = -beta * (pi_j - old_j) z
            let coeff = surrogate_scale * (indicator - new[j]) - inv_n * params.beta * (new[j] - old[j]);
            if coeff != 0.0 {
                let row = &mut grad[j * dim..(j + 1) * dim];
                for (g, x) in row.iter_mut().zip(&t.z.values) {
                    *g += coeff * x;
                }
            }
        }
    }

    if params.weight_decay != 0.0 {
        let sq: f64 = policy.weights().iter().map(|w| w * w).sum();
        objective -= 0.5 * params.weight_decay * sq;
        for (g, w) in grad.iter_mut().zip(policy.weights()) {
            *g -= params.weight_decay * w;
        }
    }
    Ok((objective, grad))
}
