//! Experiment driver: synthetic data, metrics, and report emission.

mod experiment;
mod metrics;
mod synth;

pub use experiment::{
    run_experiment, EpisodeRecord, ExperimentSpec, Report, ReportRow, RunOptions, Setting,
};
pub use metrics::{mean_std, realized_alt_cost, top_n_accuracy};
pub use synth::{synth, SynthParams, MOVES};
