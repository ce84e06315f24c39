//! Deterministic fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use re2llm_core::data::sample_candidate_set;
use re2llm_core::encoder::StateVector;
use re2llm_core::kb::KnowledgeBase;
use re2llm_core::sim::{generate_world, simulate_ranking, SimWorld, WorldConfig};
use re2llm_core::{CandidateSet, Policy, Session, Transition};

pub fn unit_state(d: usize, rng: &mut impl Rng) -> StateVector {
    let mut values: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = values.iter().map(|x| x * x).sum::<f64>().sqrt();
    values.iter_mut().for_each(|x| *x /= norm);
    StateVector { values }
}

pub fn policy(num_actions: usize, d: usize, seed: u64) -> Policy {
    Policy::random(num_actions, d, 0.1, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn batch(n: usize, d: usize, num_actions: usize, seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z = unit_state(d, &mut rng);
            Transition {
                z_next: z.clone(),
                z,
                action: rng.gen_range(0..num_actions),
                reward: rng.gen_range(-1.0..1.0),
                behavior_prob: 1.0,
            }
        })
        .collect()
}

/// A small simulated world with its canonical hints.
pub struct SimFixture {
    pub world: SimWorld,
    pub kb: KnowledgeBase,
}

impl SimFixture {
    pub fn new() -> Self {
        let world = generate_world(&WorldConfig { num_items: 1000, num_sessions: 200, num_modes: 5, seed: 1, ..WorldConfig::default() })
            .expect("valid world config");
        let kb = KnowledgeBase::from_texts(10, &world.canonical_hints(5)).expect("hints fit");
        Self { world, kb }
    }

    pub fn session(&self) -> &Session {
        &self.world.sessions[0]
    }

    pub fn candidates(&self) -> CandidateSet {
        sample_candidate_set(self.session(), &self.world.catalog, 50, 3).expect("catalog is large enough")
    }

    /// The simulated reply for the fixture session, as a model would send it.
    pub fn reply(&self) -> String {
        let hint = self.kb.hints[0].text.as_str();
        simulate_ranking(self.session(), &self.candidates(), Some(hint), &self.world.catalog, &self.world.scenario)
    }
}

impl Default for SimFixture {
    fn default() -> Self {
        Self::new()
    }
}
