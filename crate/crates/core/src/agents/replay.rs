//! Fixed-capacity ring buffer of transitions with uniform sampling.

use rand::Rng;

use crate::envs::Transition;
use crate::rng::JobRng;

pub const DEFAULT_CAPACITY: usize = 2_000_000;

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    slots: Vec<Transition>,
    next: usize,
    /// Total transitions ever pushed.
    pub pushed: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            slots: Vec::new(),
            next: 0,
            pushed: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Insert, overwriting the oldest transition once full.
    pub fn push(&mut self, t: Transition) {
        if self.slots.len() < self.capacity {
            self.slots.push(t);
        } else {
            self.slots[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.pushed += 1;
    }

    /// Slot indices drawn uniformly with replacement.
    pub fn sample_indices(&self, n: usize, rng: &mut JobRng) -> Vec<usize> {
        if self.slots.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.gen_range(0..self.slots.len())).collect()
    }

    pub fn sample(&self, n: usize, rng: &mut JobRng) -> Vec<&Transition> {
        self.sample_indices(n, rng)
            .into_iter()
            .map(|i| &self.slots[i])
            .collect()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.slots[i]
    }
}
