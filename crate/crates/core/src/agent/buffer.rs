use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use super::Transition;

/// Bounded FIFO of transitions. Each entry carries a monotonically increasing
/// sequence number.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    entries: VecDeque<(u64, Transition)>,
    capacity: usize,
    next_seq: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay buffer capacity must be >= 1");
        Self { entries: VecDeque::with_capacity(capacity), capacity, next_seq: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((self.next_seq, t));
        self.next_seq += 1;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sequence_numbers(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|(s, _)| *s)
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.entries.get(i).map(|(_, t)| t)
    }

    /// One shuffled pass: disjoint index minibatches covering the buffer.
    pub fn minibatches(&self, batch_size: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.shuffle(rng);
        idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
    }

    pub fn batch(&self, indices: &[usize]) -> Vec<Transition> {
        indices.iter().map(|&i| self.entries[i].1.clone()).collect()
    }
}
