//! Replay memory and the bounded buffer of state-value differences that sets
//! the elastic segmentation threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::Observation;
use crate::error::{Error, Result};

/// One stored experience. A transition spanning `extra_steps + 1` environment
/// steps carries the discounted sum of their rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub start: Observation,
    pub action: usize,
    pub reward: f64,
    pub end: Observation,
    pub extra_steps: u32,
    pub terminal: bool,
}

impl Transition {
    pub fn is_multi_step(&self) -> bool {
        self.extra_steps > 0
    }
}

/// Fixed-capacity FIFO replay memory with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(transition);
        } else {
            self.items[self.next] = transition;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `batch_size` draws, uniform with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::Usage("sample from an empty replay buffer".into()));
        }
        Ok((0..batch_size)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }
}

/// Which standard deviation the threshold uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdKind {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n - 1`.
    Sample,
}

/// Ring buffer of non-negative differences with O(1) mean and deviation.
///
/// Sums are kept relative to a shift close to the running mean and are
/// rebuilt from the contents once per `capacity` pushes, which bounds
/// floating-point drift.
#[derive(Clone, Debug)]
pub struct DiffBuffer {
    capacity: usize,
    values: Vec<f64>,
    next: usize,
    std_kind: StdKind,
    shift: f64,
    sum: f64,
    sum_sq: f64,
    since_rebuild: usize,
}

impl DiffBuffer {
    pub fn new(capacity: usize, std_kind: StdKind) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("difference buffer capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            values: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            std_kind,
            shift: 0.0,
            sum: 0.0,
            sum_sq: 0.0,
            since_rebuild: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn rebuild(&mut self) {
        let n = self.values.len();
        self.shift = if n == 0 {
            0.0
        } else {
            self.values.iter().sum::<f64>() / n as f64
        };
        let shift = self.shift;
        self.sum = self.values.iter().map(|v| v - shift).sum();
        self.sum_sq = self.values.iter().map(|v| (v - shift) * (v - shift)).sum();
        self.since_rebuild = 0;
    }

    /// Append `z`, evicting the oldest value when full.
    pub fn push(&mut self, z: f64) -> Result<()> {
        if !z.is_finite() {
            return Err(Error::NonFinite(format!("state-value difference {z}")));
        }
        if z < 0.0 {
            return Err(Error::Domain(format!("state-value difference {z} is negative")));
        }
        if self.values.is_empty() {
            self.shift = z;
        }
        let d = z - self.shift;
        if self.values.len() < self.capacity {
            self.values.push(z);
        } else {
            let old = self.values[self.next] - self.shift;
            self.sum -= old;
            self.sum_sq -= old * old;
            self.values[self.next] = z;
        }
        self.sum += d;
        self.sum_sq += d * d;
        self.next = (self.next + 1) % self.capacity;
        self.since_rebuild += 1;
        if self.since_rebuild >= self.capacity {
            self.rebuild();
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        self.shift + self.sum / n as f64
    }

    /// Standard deviation; 0 for fewer than two values.
    pub fn std_dev(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let nf = n as f64;
        let centered = self.sum_sq - self.sum * self.sum / nf;
        let denom = match self.std_kind {
            StdKind::Population => nf,
            StdKind::Sample => nf - 1.0,
        };
        (centered.max(0.0) / denom).sqrt()
    }

    /// `mean + std / sqrt(n)` of the current contents.
    pub fn threshold(&self) -> f64 {
        let n = self.values.len();
        if n == 0 {
            return 0.0;
        }
        self.mean() + self.std_dev() / (n as f64).sqrt()
    }

    /// Append `z`, then return the threshold of the buffer including it.
    pub fn push_and_threshold(&mut self, z: f64) -> Result<f64> {
        self.push(z)?;
        Ok(self.threshold())
    }
}
