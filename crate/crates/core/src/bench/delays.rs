use super::pipeline::{features, fit_rules};
use super::report::mse;
use super::PipelineConfig;
use crate::dataset::{self, DelaySearch, DelaySpace, RegressorConfig, TimeSeries};
use crate::{Error, Result};

/// Validation MSE, in engineering units squared, of a standard fuzzy model
/// without RBM built on `reg`. Samples before `split_index` train; every
/// later sample is a validation target, so the targets are the same for
/// every delay choice.
pub fn validation_mse(ts: &TimeSeries, reg: RegressorConfig, split_index: usize, base: &PipelineConfig) -> Result<f64> {
    let lag = reg.lag();
    if split_index <= lag || split_index >= ts.len() {
        return Err(Error::Data(format!(
            "split index {split_index} leaves no training or validation rows for n_y={}, n_u={}",
            reg.n_y, reg.n_u
        )));
    }
    let n_train = split_index - lag;
    let rows = ts.len() - lag;
    let prepared = dataset::prepare_ranges(ts, reg, 0..n_train, n_train..rows, base.data.norm_scope)?;
    let feats = features(&prepared, None)?;
    let rules = fit_rules(&feats, prepared.train.y(), base)?;
    let pred = rules.model.predict(&feats.test, false)?;
    let span = prepared.norm.y_span();
    Ok(mse(prepared.test.y(), &pred) * span * span)
}

/// The cheap evaluator used by delay search: clustering cut to one sweep.
pub fn search_config(base: &PipelineConfig) -> PipelineConfig {
    let mut cfg = base.clone();
    cfg.cluster.sweeps = 1;
    cfg
}

/// Random search over `(n_y, n_u)` with [`validation_mse`].
pub fn search(
    ts: &TimeSeries,
    space: &DelaySpace,
    n_trials: usize,
    split_index: usize,
    seed: u64,
    base: &PipelineConfig,
) -> Result<DelaySearch> {
    let cfg = search_config(base);
    dataset::random_search_delays(ts, space, n_trials, split_index, seed, |ts, reg, split| {
        validation_mse(ts, reg, split, &cfg)
    })
}
