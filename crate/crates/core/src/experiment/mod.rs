//! Experiment harness: seeded portfolio suites, power-law fits and plot data.

pub mod plots;
pub mod powerlaw;
pub mod suite;

pub use plots::{emit_plots, summarize, PlotSummary};
pub use powerlaw::{decay_constant, fit_power_law, PowerLawFit};
pub use suite::{run_suite, run_suite_sequential, DataSource, ExperimentSpec, SuiteReport, TrialRow};

#[cfg(feature = "parallel")]
pub use suite::run_suite_parallel;
