//! Data ingestion, configuration, the estimation pipeline, the Monte Carlo
//! regret harness and the `encourage` command-line tool, on top of
//! [`encourage_core`].

pub mod config;
pub mod io;
pub mod montecarlo;
pub mod output;
pub mod pipeline;

mod error;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use montecarlo::{run_montecarlo, RegretCurve};
pub use pipeline::{run_pipeline, ReportBundle};
