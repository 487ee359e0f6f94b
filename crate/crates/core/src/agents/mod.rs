//! Agents: configuration, targets, step segmentation and the training loop.

pub mod config;
pub mod elastic;
pub mod ensemble;
pub mod target;
pub mod trainer;

pub use config::{algorithm, AggregationMode, AlgoConfig, Exploration, StepMode, ABLATION_ALGORITHMS, ALGORITHM_NAMES};
pub use ensemble::{Ensemble, Scalarization};
pub use trainer::{run_training, EpisodeRecord, QStatistic, RunConfig, RunLog, EPOCHS};
