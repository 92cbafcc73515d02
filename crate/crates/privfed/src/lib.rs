//! WDBC file IO, transports, node state machines, experiment runner and
//! reports for the federated breast-cancer classifier.

pub mod config;
pub mod experiment;
pub mod node;
pub mod report;
pub mod transport;
pub mod wdbc;

pub use config::{ConfigError, ExperimentConfig, FeatureMode, TransportKind, Tuning};
pub use experiment::{run_experiment, run_experiment_on, ExperimentError, ExperimentReport};
pub use report::emit_report;
