use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    compute_reward, kl_divergence, action_distribution, policy_objective_and_gradient, select_action, update_policy,
    AdamState, Policy, ReplayBuffer, RewardMode, SurrogateParams, Transition,
};
use crate::data::{sample_candidate_set, CandidateSet, Catalog, Session};
use crate::encoder::{encode_session, EncoderSpec, StateVector};
use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::kb::KnowledgeBase;
use crate::llm::RankedOutput;
use crate::recommender::Recommender;
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// KL penalty coefficient.
    pub beta: f64,
    pub epsilon: f64,
    /// Passes over the training sessions.
    pub episodes: usize,
    pub reward_metric: Metric,
    pub reward_mode: RewardMode,
    pub seed: u64,
    /// Passes over the replay buffer after each episode.
    pub ppo_epochs: usize,
    /// Std of the initial weights; 0 starts from the uniform policy.
    pub init_scale: f64,
    /// Ratio clip range; `None` uses the KL penalty alone.
    pub clip: Option<f64>,
    /// `None` means four times the number of training sessions.
    pub buffer_capacity: Option<usize>,
    pub candidate_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            weight_decay: 1e-6,
            batch_size: 64,
            beta: 1.0,
            epsilon: 0.05,
            episodes: 40,
            reward_metric: Metric::Ndcg(10),
            reward_mode: RewardMode::Comparative,
            seed: 0,
            ppo_epochs: 1,
            init_scale: 0.0,
            clip: None,
            buffer_capacity: None,
            candidate_size: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return Err(Error::invalid("beta must be >= 0"));
        }
        if self.batch_size == 0 || self.candidate_size < 2 {
            return Err(Error::invalid("batch_size must be >= 1 and candidate_size >= 2"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::invalid("learning_rate must be > 0 and weight_decay >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_reward: f64,
    pub baseline: f64,
    /// Fraction of steps that retrieved a hint.
    pub hint_rate: f64,
    /// Mean KL(pi_old || pi) over the episode's states after the update.
    pub kl_to_snapshot: f64,
    pub mean_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub episode: usize,
    pub session_id: String,
    pub action: usize,
    pub greedy_action: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub curve: Vec<EpisodeStats>,
    pub actions: Vec<ActionRecord>,
    pub episodes_trained: usize,
    pub warning: Option<String>,
}

/// The `n` sessions used for agent training, drawn by a seeded shuffle.
pub fn few_shot_subset(sessions: &[Session], n: usize, seed: u64) -> Vec<Session> {
    let mut idx: Vec<usize> = (0..sessions.len()).collect();
    idx.shuffle(&mut rng_for(seed, "few-shot"));
    idx.truncate(n);
    idx.into_iter().map(|i| sessions[i].clone()).collect()
}

struct Env<'a> {
    sessions: &'a [Session],
    candidates: Vec<CandidateSet>,
    states: Vec<StateVector>,
    base: Vec<RankedOutput>,
}

impl Env<'_> {
    fn reward(&self, i: usize, action: usize, kb: &KnowledgeBase, rec: &Recommender<'_>, cfg: &TrainConfig) -> Result<f64> {
        let session = &self.sessions[i];
        let target = session.require_target()?;
        let base = &self.base[i];
        if action == 0 {
            return Ok(compute_reward(base, base, target, cfg.reward_metric, cfg.reward_mode));
        }
        let hint = kb.get(action - 1).ok_or_else(|| Error::invalid(format!("action {action} has no hint")))?;
        let enhanced = rec.rank(session, &self.candidates[i], Some(&hint.text))?;
        Ok(compute_reward(base, &enhanced, target, cfg.reward_metric, cfg.reward_mode))
    }
}

/// Train the retrieval policy on `sessions` (each must carry a target).
///
/// Every episode shuffles the sessions, acts epsilon-greedily with the
/// policy frozen at the episode start, collects rewards from the backend, and
/// then runs `ppo_epochs` minibatch passes over the replay buffer against
/// that frozen snapshot.
pub fn train_agent(
    sessions: &[Session],
    catalog: &Catalog,
    kb: &KnowledgeBase,
    encoder: &EncoderSpec,
    recommender: &Recommender<'_>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    encoder.validate()?;
    let d = encoder.d;
    if kb.is_empty() {
        let msg = "knowledge base is empty; the policy only has the no-hint action".to_string();
        log::warn!("{msg}");
        return Ok(TrainOutcome {
            policy: Policy::zeros(1, d),
            curve: Vec::new(),
            actions: Vec::new(),
            episodes_trained: 0,
            warning: Some(msg),
        });
    }
    if sessions.is_empty() {
        return Err(Error::TooFewSessions { needed: 1, got: 0 });
    }
    let cand_seed = derive_seed(config.seed, "train-candidates");
    let candidates = sessions
        .iter()
        .map(|s| sample_candidate_set(s, catalog, config.candidate_size, cand_seed))
        .collect::<Result<Vec<_>>>()?;
    let states = sessions
        .par_iter()
        .map(|s| encode_session(s, catalog, encoder))
        .collect::<Result<Vec<_>>>()?;
    let base = sessions
        .par_iter()
        .zip(&candidates)
        .map(|(s, c)| recommender.rank(s, c, None))
        .collect::<Result<Vec<_>>>()?;
    let env = Env { sessions, candidates, states, base };

    let n_actions = kb.len() + 1;
    let mut policy = if config.init_scale > 0.0 {
        Policy::random(n_actions, d, config.init_scale, &mut rng_for(config.seed, "train-init"))
    } else {
        Policy::zeros(n_actions, d)
    };
    let mut adam = AdamState::new(n_actions * d);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity.unwrap_or(4 * sessions.len()).max(1));
    let mut reward_sum = 0.0;
    let mut reward_count = 0usize;
    let mut curve = Vec::with_capacity(config.episodes);
    let mut actions = Vec::new();

    for episode in 0..config.episodes {
        let snapshot = policy.clone();
        let mut order: Vec<usize> = (0..sessions.len()).collect();
        order.shuffle(&mut rng_for(config.seed, &format!("train-order/{episode}")));
        let mut explore = rng_for(config.seed, &format!("train-explore/{episode}"));

        let mut steps = Vec::with_capacity(order.len());
        for &i in &order {
            let (action, prob) = select_action(&snapshot, &env.states[i], config.epsilon, &mut explore)?;
            let greedy = snapshot.greedy(&env.states[i])?;
            actions.push(ActionRecord {
                episode,
                session_id: sessions[i].session_id.clone(),
                action,
                greedy_action: greedy,
            });
            steps.push((i, action, prob));
        }
        let rewards = steps
            .par_iter()
            .map(|&(i, a, _)| env.reward(i, a, kb, recommender, config))
            .collect::<Result<Vec<_>>>()?;

        for (k, (&(i, action, prob), &reward)) in steps.iter().zip(&rewards).enumerate() {
            let next = steps.get(k + 1).map_or(i, |s| s.0);
            buffer.push(Transition {
                z: env.states[i].clone(),
                action,
                reward,
                z_next: env.states[next].clone(),
                behavior_prob: prob,
            });
        }
        reward_sum += rewards.iter().sum::<f64>();
        reward_count += rewards.len();
        let baseline = reward_sum / reward_count as f64;

        let params = SurrogateParams {
            beta: config.beta,
            baseline,
            weight_decay: config.weight_decay,
            clip: config.clip,
        };
        let mut batch_rng = rng_for(config.seed, &format!("train-batches/{episode}"));
        let mut objectives = Vec::new();
        for _ in 0..config.ppo_epochs {
            for idx in buffer.minibatches(config.batch_size, &mut batch_rng) {
                let batch = buffer.batch(&idx);
                let (objective, grad) = policy_objective_and_gradient(&policy, &snapshot, &batch, &params)?;
                update_policy(&mut policy, &grad, &mut adam, config.learning_rate)?;
                objectives.push(objective);
            }
        }

        let mut kl = 0.0;
        for &(i, _, _) in &steps {
            let old = action_distribution(&snapshot, &env.states[i])?;
            let new = action_distribution(&policy, &env.states[i])?;
            kl += kl_divergence(&old, &new)?;
        }
        let stats = EpisodeStats {
            episode,
            mean_reward: mean(&rewards),
            baseline,
            hint_rate: steps.iter().filter(|s| s.1 != 0).count() as f64 / steps.len() as f64,
            kl_to_snapshot: kl / steps.len() as f64,
            mean_objective: mean(&objectives),
        };
        log::info!(
            "episode {episode}: mean reward {:.4}, hint rate {:.3}, kl {:.2e}",
            stats.mean_reward,
            stats.hint_rate,
            stats.kl_to_snapshot
        );
        curve.push(stats);
    }

    Ok(TrainOutcome {
        policy,
        curve,
        actions,
        episodes_trained: config.episodes,
        warning: None,
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

