use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the ensemble's per-action target values are combined before the
/// bootstrap maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregationMode {
    /// Minimum for multi-step transitions, average for single-step ones.
    Eedqn,
    /// Average for multi-step transitions, minimum for single-step ones.
    VariantEedqn,
    MinAll,
    AvgAll,
    /// `lambda * avg + (1 - lambda) * min` for every transition.
    Convex { lambda: f64 },
    /// One network, plain max backup.
    SingleNet,
    /// Online networks choose the next action, target networks evaluate it.
    DoubleSelect,
    /// Minimum over the ensemble, single-step Maxmin backup.
    MaxminAll,
}

/// How environment steps are grouped into stored transitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepMode {
    Single,
    /// Sliding `n`-step returns.
    FixedN { n: u32 },
    /// Segments that close when consecutive state values diverge.
    Elastic,
}

/// Linear epsilon decay from `start` to `floor` over `decay_steps` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exploration {
    pub start: f64,
    pub floor: f64,
    pub decay_steps: u64,
}

impl Default for Exploration {
    fn default() -> Self {
        Self {
            start: 1.0,
            floor: 0.01,
            decay_steps: 250_000,
        }
    }
}

impl Exploration {
    pub fn epsilon(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.floor;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.floor - self.start) * frac
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub name: String,
    pub aggregation: AggregationMode,
    pub ensemble_size: usize,
    pub step_mode: StepMode,
    pub gamma: f64,
    /// Gradient-step opportunities between target syncs.
    pub target_update_interval: u64,
    pub exploration: Exploration,
    pub batch_size: usize,
    /// Environment steps per gradient-step opportunity.
    pub update_every: u64,
}

impl AlgoConfig {
    fn base(name: &str, aggregation: AggregationMode, ensemble_size: usize, step_mode: StepMode) -> Self {
        Self {
            name: name.to_string(),
            aggregation,
            ensemble_size,
            step_mode,
            gamma: 0.99,
            target_update_interval: 1000,
            exploration: Exploration::default(),
            batch_size: 32,
            update_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{}: {msg}", self.name)));
        if self.ensemble_size == 0 {
            return bad("ensemble size must be at least 1".into());
        }
        if self.aggregation == AggregationMode::SingleNet && self.ensemble_size != 1 {
            return bad(format!(
                "single-net aggregation needs ensemble size 1, got {}",
                self.ensemble_size
            ));
        }
        if let AggregationMode::Convex { lambda } = self.aggregation {
            if !(0.0..=1.0).contains(&lambda) {
                return bad(format!("convex weight {lambda} outside [0, 1]"));
            }
        }
        if let StepMode::FixedN { n } = self.step_mode {
            if n == 0 {
                return bad("n-step horizon must be at least 1".into());
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma {} outside (0, 1)", self.gamma));
        }
        if self.batch_size == 0 || self.target_update_interval == 0 || self.update_every == 0 {
            return bad("batch size, target interval and update period must be positive".into());
        }
        let e = self.exploration;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.floor) {
            return bad("exploration rates must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Named algorithms accepted by [`algorithm`], besides `nstep:<k>`.
pub const ALGORITHM_NAMES: [&str; 13] = [
    "dqn",
    "ddqn",
    "avgdqn",
    "maxmindqn",
    "nstep",
    "esdqn",
    "eedqn",
    "variant_eedqn",
    "min_eedqn",
    "mean_eedqn",
    "convex_eedqn1",
    "convex_eedqn2",
    "convex_eedqn3",
];

/// The aggregation ablation: the elastic single-network baseline and seven
/// ways of combining a two-member ensemble.
pub const ABLATION_ALGORITHMS: [&str; 8] = [
    "esdqn",
    "eedqn",
    "variant_eedqn",
    "min_eedqn",
    "mean_eedqn",
    "convex_eedqn1",
    "convex_eedqn2",
    "convex_eedqn3",
];

/// Default horizon of `nstep`.
pub const DEFAULT_N_STEP: u32 = 3;

/// Preset configuration of a named algorithm.
pub fn algorithm(name: &str) -> Result<AlgoConfig> {
    use AggregationMode as A;
    use StepMode as S;
    let cfg = match name {
        "dqn" => AlgoConfig::base(name, A::SingleNet, 1, S::Single),
        "ddqn" => AlgoConfig::base(name, A::DoubleSelect, 1, S::Single),
        "avgdqn" => AlgoConfig::base(name, A::AvgAll, 2, S::Single),
        "maxmindqn" => AlgoConfig::base(name, A::MaxminAll, 2, S::Single),
        "nstep" => AlgoConfig::base(name, A::SingleNet, 1, S::FixedN { n: DEFAULT_N_STEP }),
        "esdqn" => AlgoConfig::base(name, A::SingleNet, 1, S::Elastic),
        "eedqn" => AlgoConfig::base(name, A::Eedqn, 2, S::Elastic),
        "variant_eedqn" => AlgoConfig::base(name, A::VariantEedqn, 2, S::Elastic),
        "min_eedqn" => AlgoConfig::base(name, A::MinAll, 2, S::Elastic),
        "mean_eedqn" => AlgoConfig::base(name, A::AvgAll, 2, S::Elastic),
        "convex_eedqn1" => AlgoConfig::base(name, A::Convex { lambda: 0.75 }, 2, S::Elastic),
        "convex_eedqn2" => AlgoConfig::base(name, A::Convex { lambda: 0.5 }, 2, S::Elastic),
        "convex_eedqn3" => AlgoConfig::base(name, A::Convex { lambda: 0.25 }, 2, S::Elastic),
        _ => {
            let n = name
                .strip_prefix("nstep:")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::Config(format!("unknown algorithm {name:?}")))?;
            AlgoConfig::base(name, A::SingleNet, 1, S::FixedN { n })
        }
    };
    Ok(cfg)
}
