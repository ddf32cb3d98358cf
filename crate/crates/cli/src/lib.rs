//! Configuration and experiment drivers behind the `aocsi` binary.

pub mod config;
pub mod experiments;
pub mod validate;

pub use config::ExperimentConfig;
