//! Environment interface and the games behind it.
//!
//! All games use the MinAtar 10x10 grid convention: an observation is a
//! `H x W x C` binary tensor, flattened as `(y * W + x) * C + c`.

pub mod asterix;
pub mod breakout;
pub mod chain;
pub mod freeway;
pub mod space_invaders;

pub use asterix::Asterix;
pub use breakout::Breakout;
pub use chain::{chain_optimal_q, ChainMdp, CHAIN_BACK, CHAIN_FORWARD};
pub use freeway::Freeway;
pub use space_invaders::SpaceInvaders;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest grid an [`Observation`] can hold, in cells.
pub const MAX_OBS_CELLS: usize = 1024;

/// Binary `H x W x C` grid, bit-packed.
///
/// Bits live inline so the replay buffer is one flat allocation. Millions of
/// small boxed grids interleaved with the learner's large temporaries
/// fragmented the heap badly.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Observation {
    height: usize,
    width: usize,
    channels: usize,
    bits: [u64; MAX_OBS_CELLS / 64],
}

impl Observation {
    /// Panics if the grid has more than [`MAX_OBS_CELLS`] cells.
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        let n = height * width * channels;
        assert!(n <= MAX_OBS_CELLS, "observation of {n} cells exceeds {MAX_OBS_CELLS}");
        Self {
            height,
            width,
            channels,
            bits: [0; MAX_OBS_CELLS / 64],
        }
    }

    #[inline]
    fn index(&self, y: usize, x: usize, c: usize) -> usize {
        debug_assert!(y < self.height && x < self.width && c < self.channels);
        (y * self.width + x) * self.channels + c
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize) {
        let i = self.index(y, x, c);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> bool {
        let i = self.index(y, x, c);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of active cells in channel `c`.
    pub fn count_channel(&self, c: usize) -> usize {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (y, x)))
            .filter(|&(y, x)| self.get(y, x, c))
            .count()
    }

    /// Active `(y, x)` cells of channel `c`, row-major order.
    pub fn cells(&self, c: usize) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (y, x)))
            .filter(|&(y, x)| self.get(y, x, c))
            .collect()
    }

    /// Write the observation as 0.0/1.0 values into `out` (length `len()`).
    pub fn write_flat(&self, out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        for (i, v) in out.iter_mut().enumerate() {
            *v = f64::from((self.bits[i / 64] >> (i % 64) & 1) as u8);
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.write_flat(&mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
}

/// Static description of an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub actions: usize,
    pub shape: (usize, usize, usize),
    /// Largest reward a single step can pay.
    pub r_max: f64,
}

impl EnvSpec {
    pub fn observation_len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Start a new episode. Episodes are a pure function of the seed and the
    /// action sequence.
    fn reset(&mut self, seed: u64) -> Observation;

    fn step(&mut self, action: usize) -> Result<StepResult>;

    fn observation(&self) -> Observation;
}

/// Names accepted by [`make_env`], besides `chain:<n>`.
pub const GAME_NAMES: [&str; 4] = ["breakout", "freeway", "asterix", "space_invaders"];

/// Build an environment from its name: `breakout`, `freeway`, `asterix`,
/// `space_invaders` or `chain:<n>`.
pub fn make_env(name: &str) -> Result<Box<dyn Environment>> {
    match name {
        "breakout" => Ok(Box::new(Breakout::new())),
        "freeway" => Ok(Box::new(Freeway::new())),
        "asterix" => Ok(Box::new(Asterix::new())),
        "space_invaders" => Ok(Box::new(SpaceInvaders::new())),
        _ => {
            if let Some(n) = name.strip_prefix("chain:") {
                let n: usize = n
                    .parse()
                    .map_err(|_| Error::Config(format!("bad chain length in {name:?}")))?;
                Ok(Box::new(ChainMdp::new(n)?))
            } else {
                Err(Error::Config(format!("unknown environment {name:?}")))
            }
        }
    }
}

/// Spec of a named environment without keeping the instance around.
pub fn env_spec(name: &str) -> Result<EnvSpec> {
    make_env(name).map(|e| e.spec().clone())
}

pub(crate) fn check_action(spec: &EnvSpec, action: usize, terminal: bool) -> Result<()> {
    if terminal {
        return Err(Error::Usage(format!(
            "{}: step called after the episode terminated",
            spec.name
        )));
    }
    if action >= spec.actions {
        return Err(Error::Usage(format!(
            "{}: action {action} out of range (0..{})",
            spec.name, spec.actions
        )));
    }
    Ok(())
}
