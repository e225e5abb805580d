//! Fixed-capacity experience ring buffer with seeded uniform sampling.
//!
//! Each stored transition carries, besides the usual `(obs, action, next_obs,
//! done)` tuple, the scalar stage cost of the step and the scalar safety
//! violation cost (hazard plus obstacle contact). The violation costs of a
//! sampled batch form the sample set from which the density-based tail
//! statistic of the composite loss is estimated.
//!
//! Sampling is uniform **with replacement**: the determinism contract is then
//! a plain sequence of independent index draws, and with batches far smaller
//! than the buffer the difference from without-replacement sampling is
//! negligible.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One environment step as stored in the buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Observation before the step.
    pub obs: Vec<f64>,
    /// Action index taken.
    pub action: usize,
    /// Stage cost received for the step.
    pub stage_cost: f64,
    /// Non-negative safety violation cost of the step (hazard + obstacle).
    pub violation_cost: f64,
    /// Observation after the step.
    pub next_obs: Vec<f64>,
    /// Whether the episode ended with this step.
    pub done: bool,
}

/// Ring buffer over [`Transition`]s. Oldest entries are overwritten first
/// once the capacity is reached. Single writer, single sampler; may be moved
/// between threads but not shared concurrently.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    /// An empty buffer holding at most `capacity` transitions.
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("replay capacity must be positive"));
        }
        Ok(ReplayBuffer { capacity, storage: Vec::new(), cursor: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Current fill (≤ capacity).
    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Append a transition, overwriting the oldest entry when full.
    ///
    /// The first pushed transition fixes the observation dimension; later
    /// pushes must match it. The violation cost must be finite and
    /// non-negative and the stage cost finite.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.len() != t.next_obs.len() {
            return Err(Error::invalid(format!(
                "observation dims differ within one transition: {} vs {}",
                t.obs.len(),
                t.next_obs.len()
            )));
        }
        if let Some(first) = self.storage.first() {
            if t.obs.len() != first.obs.len() {
                return Err(Error::invalid(format!(
                    "observation dim {} does not match the buffer's dim {}",
                    t.obs.len(),
                    first.obs.len()
                )));
            }
        }
        if !(t.violation_cost >= 0.0) || !t.violation_cost.is_finite() {
            return Err(Error::invalid(format!(
                "violation cost must be finite and non-negative, got {}",
                t.violation_cost
            )));
        }
        if !t.stage_cost.is_finite() {
            return Err(Error::invalid("stage cost must be finite"));
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
        Ok(())
    }

    /// The transition at ring slot `i` (0 ≤ `i` < `len`; slot order is
    /// storage order, not age order).
    pub fn get(&self, i: usize) -> &Transition {
        &self.storage[i]
    }

    /// Draw `batch` transitions uniformly with replacement. Deterministic
    /// given the generator state. Errors when the buffer holds fewer than
    /// `batch` entries.
    pub fn sample<'a>(
        &'a self,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<&'a Transition>> {
        if batch == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if self.storage.len() < batch {
            return Err(Error::InsufficientData(format!(
                "buffer holds {} transitions, batch needs {batch}",
                self.storage.len()
            )));
        }
        Ok((0..batch).map(|_| &self.storage[rng.random_range(0..self.storage.len())]).collect())
    }
}
