use serde::{Deserialize, Serialize};

use super::PipelineConfig;
use crate::probcluster::SweepStats;
use crate::probopt::StopReason;

/// Error statistics on one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Errors {
    pub mse: f64,
    pub rms: f64,
    /// In engineering units of the output.
    pub mse_denorm: f64,
    pub rms_denorm: f64,
}

impl Errors {
    /// Statistics of `y - yhat` in normalized units, rescaled by `span²`
    /// for the engineering-unit figures.
    pub fn of(y: &[f64], yhat: &[f64], span: f64) -> Self {
        let mse = mse(y, yhat);
        let mse_denorm = mse * span * span;
        Errors { mse, rms: mse.sqrt(), mse_denorm, rms_denorm: mse_denorm.sqrt() }
    }
}

pub fn mse(y: &[f64], yhat: &[f64]) -> f64 {
    assert_eq!(y.len(), yhat.len());
    if y.is_empty() {
        return 0.0;
    }
    y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// Row and sample counts of the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub raw_pairs: usize,
    pub regressor_rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Raw pairs left after the first `train_rows` pairs, i.e. the test size
    /// if the split were taken on raw pairs instead of regressor rows.
    pub raw_test_pairs: usize,
    pub clamped_test_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbSummary {
    pub initial_log_likelihood: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

/// Wall time per stage in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub prepare: f64,
    pub rbm: f64,
    pub clustering: f64,
    pub consequents: f64,
    pub probabilities: f64,
    pub evaluate: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.prepare + self.rbm + self.clustering + self.consequents + self.probabilities + self.evaluate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub use_rbm: bool,
    pub use_prob_rules: bool,
    pub train: Errors,
    pub test: Errors,
    pub k: usize,
    pub cluster_sizes: Vec<usize>,
    pub sweeps: Vec<SweepStats>,
    /// Mean reconstruction error before training and after each epoch.
    pub rbm_recon_error: Option<Vec<f64>>,
    pub probopt: Option<ProbSummary>,
    pub split: SplitCounts,
    pub timings_ms: Timings,
    pub config: PipelineConfig,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the timing fields zeroed, for reproducibility checks.
    pub fn canonical_json(&self) -> String {
        RunReport { timings_ms: Timings::default(), ..self.clone() }.to_json()
    }
}
