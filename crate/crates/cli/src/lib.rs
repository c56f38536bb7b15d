//! Experiment pipeline over the `dwecho` toolkit.
//!
//! Each subcommand of the `dwecho-cli` binary is a function here that takes
//! a validated [`config::ExperimentConfig`] and explicit input/output
//! directories, so the whole chain can also be driven from Rust:
//!
//! ```text
//! simulate     -> dataset/
//! train        dataset/ -> run/best.dwck
//! reconstruct  dataset/ [+ checkpoint] -> recon/
//! track        recon/ -> tracks/
//! evaluate     dataset/ + recon/ [+ tracks/] -> report/
//! ```

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod reconstruct;
pub mod render;
pub mod simulate;
pub mod track;
pub mod train;

pub use config::ExperimentConfig;
pub use dataset::{Dataset, Split};
pub use error::{CliError, Result};
pub use evaluate::{cmd_evaluate, EvalInput, EvaluationSummary};
pub use reconstruct::{cmd_reconstruct, Method};
pub use simulate::cmd_simulate;
pub use track::cmd_track;
pub use train::cmd_train;
