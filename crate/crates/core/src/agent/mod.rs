//! Linear-softmax hint retrieval policy and its KL-penalised PPO trainer.
//!
//! Action 0 means "no hint"; action `k >= 1` selects knowledge-base hint
//! `k - 1`. Each session is a one-step episode (contextual bandit).

mod adam;
mod buffer;
mod checkpoint;
mod ppo;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Session;
use crate::encoder::StateVector;
use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::llm::RankedOutput;

pub use adam::{update_policy, AdamState};
pub use buffer::ReplayBuffer;
pub use checkpoint::PolicyCheckpoint;
pub use ppo::{policy_objective_and_gradient, SurrogateParams};
pub use train::{few_shot_subset, train_agent, ActionRecord, EpisodeStats, TrainConfig, TrainOutcome};

/// Row-major `(num_actions x dim)` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    num_actions: usize,
    dim: usize,
    weights: Vec<f64>,
}

impl Policy {
    pub fn zeros(num_actions: usize, dim: usize) -> Self {
        assert!(num_actions >= 1 && dim >= 1, "policy needs at least one action and one dimension");
        Self { num_actions, dim, weights: vec![0.0; num_actions * dim] }
    }

    /// Entries uniform in `[-scale, scale]`.
    pub fn random(num_actions: usize, dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(num_actions, dim);
        if scale > 0.0 {
            p.weights.iter_mut().for_each(|w| *w = rng.gen_range(-scale..=scale));
        }
        p
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_actions = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if num_actions == 0 || dim == 0 {
            return Err(Error::invalid("policy matrix must be non-empty"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.len() });
        }
        let weights: Vec<f64> = rows.into_iter().flatten().collect();
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("policy weights must be finite"));
        }
        Ok(Self { num_actions, dim, weights })
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn logits(&self, z: &StateVector) -> Result<Vec<f64>> {
        if z.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: z.dim() });
        }
        Ok(self
            .weights
            .chunks(self.dim)
            .map(|row| row.iter().zip(&z.values).map(|(w, x)| w * x).sum())
            .collect())
    }

    pub fn greedy(&self, z: &StateVector) -> Result<usize> {
        Ok(argmax(&action_distribution(self, z)?))
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Lowest index among the maxima.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `softmax(W z)`.
pub fn action_distribution(policy: &Policy, z: &StateVector) -> Result<Vec<f64>> {
    Ok(softmax(&policy.logits(z)?))
}

/// Epsilon-greedy draw. Returns the action and its probability under the
/// epsilon-mixed behaviour distribution.
pub fn select_action(policy: &Policy, z: &StateVector, epsilon: f64, rng: &mut impl Rng) -> Result<(usize, f64)> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let n = policy.num_actions;
    let greedy = policy.greedy(z)?;
    let action = if epsilon > 0.0 && rng.gen_bool(epsilon) { rng.gen_range(0..n) } else { greedy };
    let uniform = epsilon / n as f64;
    let prob = if action == greedy { uniform + (1.0 - epsilon) } else { uniform };
    Ok((action, prob))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Improvement of the hint-enhanced ranking over the basic one.
    #[default]
    Comparative,
    /// Metric of the hint-enhanced ranking alone.
    Absolute,
}

pub fn compute_reward(base: &RankedOutput, enhanced: &RankedOutput, target: &str, metric: Metric, mode: RewardMode) -> f64 {
    let after = metric.score(enhanced, target);
    match mode {
        RewardMode::Comparative => after - metric.score(base, target),
        RewardMode::Absolute => after,
    }
}

/// `sum p_i ln(p_i / q_i)` in nats, with `0 ln 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::SupportViolation(i));
            }
            total += pi * (pi / qi).ln();
        }
    }
    // Rounding can leave a tiny negative sum; the true value is never below 0.
    Ok(total.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub z: StateVector,
    pub action: usize,
    pub reward: f64,
    pub z_next: StateVector,
    pub behavior_prob: f64,
}

/// Chooses an action (0 = no hint) for a session at inference time.
pub trait ActionSelector: Sync {
    fn select(&self, session: &Session, state: &StateVector) -> Result<usize>;
}

impl ActionSelector for Policy {
    fn select(&self, _session: &Session, state: &StateVector) -> Result<usize> {
        self.greedy(state)
    }
}

/// Always the same action.
pub struct FixedAction(pub usize);

impl ActionSelector for FixedAction {
    fn select(&self, _: &Session, _: &StateVector) -> Result<usize> {
        Ok(self.0)
    }
}

/// Selector backed by a closure, e.g. an oracle in tests.
pub struct FnSelector<F>(pub F);

impl<F> ActionSelector for FnSelector<F>
where
    F: Fn(&Session, &StateVector) -> usize + Sync,
{
    fn select(&self, session: &Session, state: &StateVector) -> Result<usize> {
        Ok((self.0)(session, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sv(v: &[f64]) -> StateVector {
        StateVector { values: v.to_vec() }
    }

    fn ranked(ids: &[&str]) -> RankedOutput {
        RankedOutput {
            session_id: "s".into(),
            ranked_item_ids: ids.iter().map(|s| s.to_string()).collect(),
            raw_text: String::new(),
            unmatched_lines: vec![],
            parse_warning: false,
        }
    }

    #[test]
    fn zero_weights_uniform() {
        let p = Policy::zeros(5, 3);
        let probs = action_distribution(&p, &sv(&[0.3, -1.0, 2.0])).unwrap();
        assert!(probs.iter().all(|x| (x - 0.2).abs() < 1e-15));
    }

    #[test]
    fn two_action_closed_form() {
        let p = Policy::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let probs = action_distribution(&p, &sv(&[1.0, 0.0])).unwrap();
        let e = std::f64::consts::E;
        assert!((probs[0] - e / (1.0 + e)).abs() < 1e-12);
        assert!((probs[0] - 0.7311).abs() < 1e-4);
        assert!((probs[1] - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn dimension_mismatch() {
        let p = Policy::zeros(2, 3);
        assert!(matches!(action_distribution(&p, &sv(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn huge_logits_do_not_overflow() {
        let p = Policy::from_rows(vec![vec![1e6], vec![-1e6], vec![999_999.0]]).unwrap();
        let probs = action_distribution(&p, &sv(&[1.0])).unwrap();
        assert!(probs.iter().all(|x| x.is_finite()));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_with_zero_epsilon() {
        let p = Policy::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (a, prob) = select_action(&p, &sv(&[0.9, 0.1]), 0.0, &mut rng).unwrap();
            assert_eq!(a, 1);
            assert_eq!(prob, 1.0);
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        // binomial 3-sigma band per action over 10k draws
        let n = 4;
        let p = Policy::zeros(n, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 10_000;
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            let (a, prob) = select_action(&p, &sv(&[1.0, 0.0]), 1.0, &mut rng).unwrap();
            assert!((prob - 0.25).abs() < 1e-12 || a == 0);
            counts[a] += 1;
        }
        let mean = draws as f64 / n as f64;
        let sd = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sd, "{c}");
        }
    }

    #[test]
    fn behaviour_probability_mixes_epsilon() {
        let p = Policy::from_rows(vec![vec![1.0], vec![0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (a, prob) = select_action(&p, &sv(&[1.0]), 0.05, &mut rng).unwrap();
            let want = if a == 0 { 0.025 + 0.95 } else { 0.025 };
            assert!((prob - want).abs() < 1e-12);
        }
        assert!(select_action(&p, &sv(&[1.0]), 1.5, &mut rng).is_err());
    }

    #[test]
    fn reward_cases() {
        let miss = ranked(&["a", "b"]);
        let top = ranked(&["t", "a"]);
        let third = ranked(&["a", "b", "t"]);
        assert_eq!(compute_reward(&miss, &top, "t", Metric::Ndcg(10), RewardMode::Comparative), 1.0);
        let r = compute_reward(&third, &top, "t", Metric::Ndcg(10), RewardMode::Comparative);
        assert!((r - (1.0 - 1.0 / 4f64.log2())).abs() < 1e-15);
        assert!((r - 0.5).abs() < 1e-15);
        assert_eq!(compute_reward(&third, &third, "t", Metric::Ndcg(10), RewardMode::Comparative), 0.0);
        assert_eq!(compute_reward(&third, &top, "t", Metric::Ndcg(10), RewardMode::Absolute), 1.0);
    }

    #[test]
    fn kl_hand_value() {
        let kl = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        let want = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl - want).abs() < 1e-15);
        assert!((kl - 0.1438).abs() < 1e-4);
        assert_eq!(kl_divergence(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        assert_eq!(kl_divergence(&[0.0, 1.0], &[0.5, 0.5]).unwrap(), 2f64.ln());
        assert!(matches!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::SupportViolation(1))));
    }

    proptest! {
        #[test]
        fn distributions_are_normalised(
            w in proptest::collection::vec(-50.0f64..50.0, 12),
            z in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            let rows = w.chunks(3).map(|r| r.to_vec()).collect();
            let p = Policy::from_rows(rows).unwrap();
            let probs = action_distribution(&p, &sv(&z)).unwrap();
            prop_assert!(probs.iter().all(|x| *x >= 0.0));
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn scaling_state_keeps_argmax(
            w in proptest::collection::vec(-5.0f64..5.0, 8),
            z in proptest::collection::vec(-3.0f64..3.0, 2),
            alpha in 0.01f64..100.0,
        ) {
            let rows = w.chunks(2).map(|r| r.to_vec()).collect();
            let p = Policy::from_rows(rows).unwrap();
            let scaled: Vec<f64> = z.iter().map(|x| x * alpha).collect();
            let l1 = p.logits(&sv(&z)).unwrap();
            let l2 = p.logits(&sv(&scaled)).unwrap();
            // ties can flip under rounding; only compare clear winners
            let best = argmax(&l1);
            let second = l1.iter().enumerate().filter(|(i, _)| *i != best).map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
            if l1[best] - second > 1e-9 {
                prop_assert_eq!(argmax(&l2), best);
            }
        }

        #[test]
        fn kl_is_non_negative(a in proptest::collection::vec(0.001f64..1.0, 5), b in proptest::collection::vec(0.001f64..1.0, 5)) {
            let p: Vec<f64> = { let s: f64 = a.iter().sum(); a.iter().map(|x| x / s).collect() };
            let q: Vec<f64> = { let s: f64 = b.iter().sum(); b.iter().map(|x| x / s).collect() };
            prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-15);
            prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-15);
        }
    }
}
