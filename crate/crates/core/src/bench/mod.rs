//! Pipeline orchestration, ablation and benchmark reproduction.

mod ablate;
mod config;
pub mod delays;
mod output;
pub mod pipeline;
mod report;

pub use ablate::{ablate, median, run_seed, Ablation, Cell};
pub use config::{derive_seed, DataConfig, PipelineConfig, ProbConfig, RunConfig, Source};
pub use output::{emit_predictions, write_predictions, write_run, write_trace, ModelBundle, BUNDLE};
pub use pipeline::{load_series, run_pipeline, PipelineOutput};
pub use report::{mse, Errors, ProbSummary, RunReport, SplitCounts, Timings};
