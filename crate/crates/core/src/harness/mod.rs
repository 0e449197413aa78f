//! Experiment configuration, deterministic Monte-Carlo orchestration and
//! data-file output.

pub mod config;
pub mod dat;
pub mod experiments;
pub mod figures;
pub mod runner;

pub use config::ExperimentConfig;
pub use dat::{emit_dat, parse_dat, Schema};
pub use experiments::{run, run_with, Point, ResultRecord, Series, Uncertainty};
pub use figures::{figure_plan, reproduce_figure, Figure, Scale};
pub use runner::Runner;
