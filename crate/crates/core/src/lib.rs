pub mod agents;
pub mod buffers;
pub mod envs;
pub mod error;
pub mod metrics;
pub mod tensornet;

pub use error::{Error, Result};
