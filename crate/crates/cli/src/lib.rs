//! Experiment harness for `lmcf-core`: JSON configs, reproducible run
//! directories with checkpoint/resume, `(β, n)` sweeps and SVG figures.

pub mod config;
pub mod plot;
pub mod run;
pub mod sweep;

pub use config::{ConfigError, Diagnostics, ExperimentConfig, InitialSpec, OutputSpec, RescaleRequest, SCHEMA_VERSION};
pub use plot::{export_plots, PlotKind, PlotReport};
pub use run::{
    density_probe, load_run, rescale_run, resume, resume_with, run_experiment, run_with, HarnessError, LoadedRun,
    RunControl, RunManifest, RunOutcome, RunStatus, RunSummary,
};
pub use sweep::{sweep, SweepFailure, SweepRow, SweepTable};
