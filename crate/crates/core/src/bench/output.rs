use std::path::Path;

use crate::crbm::RbmModel;
use crate::dataset::{NormParams, RegressorConfig};
use crate::fuzzy::FuzzyModel;
use crate::probopt::TraceRecord;
use crate::{persist, Error, Result, Rows};

use super::pipeline::PipelineOutput;
use serde::{Deserialize, Serialize};

/// Write a predictions CSV with columns `k, y_true, y_pred, residual` in
/// normalized units followed by the same three in engineering units. `k` is
/// the raw time index of each row.
pub fn emit_predictions(
    path: &Path,
    model: &FuzzyModel,
    features: &Rows,
    y: &[f64],
    norm: &NormParams,
    probabilistic: bool,
    first_index: usize,
) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Data("no rows to predict".into()));
    }
    let pred = model.predict(features, probabilistic)?;
    write_predictions(path, y, &pred, norm, first_index)
}

pub fn write_predictions(path: &Path, y: &[f64], pred: &[f64], norm: &NormParams, first_index: usize) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Data("no rows to predict".into()));
    }
    if y.len() != pred.len() {
        return Err(Error::Dimension { expected: y.len(), got: pred.len() });
    }
    let io = |e: csv::Error| Error::Format { path: path.into(), msg: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["k", "y_true", "y_pred", "residual", "y_true_denorm", "y_pred_denorm", "residual_denorm"])
        .map_err(io)?;
    for (i, (&t, &p)) in y.iter().zip(pred).enumerate() {
        let (td, pd) = (norm.unscale_y(t), norm.unscale_y(p));
        w.write_record(&[
            (first_index + i).to_string(),
            t.to_string(),
            p.to_string(),
            (t - p).to_string(),
            td.to_string(),
            pd.to_string(),
            (td - pd).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Everything needed to evaluate a trained model on new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub regressors: RegressorConfig,
    pub norm: NormParams,
    pub probabilistic: bool,
    pub rbm: Option<RbmModel>,
    pub fuzzy: FuzzyModel,
}

pub const BUNDLE: &str = "dfm-model";

impl ModelBundle {
    pub fn from_output(out: &PipelineOutput) -> Self {
        ModelBundle {
            regressors: out.report.config.regressors,
            norm: out.prepared.norm,
            probabilistic: out.report.use_prob_rules,
            rbm: out.rbm.clone(),
            fuzzy: out.model.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::save(path, BUNDLE, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let b: ModelBundle = persist::load(path, BUNDLE)?;
        let bad = |e: Error| Error::Format { path: path.into(), msg: e.to_string() };
        b.fuzzy.validate().map_err(bad)?;
        if let Some(r) = &b.rbm {
            r.validate().map_err(bad)?;
            if r.visible_len() != b.regressors.width() || r.hidden_len() != b.fuzzy.m() {
                return Err(bad(Error::Data("RBM shape does not match the regressors and rules".into())));
            }
        } else if b.fuzzy.m() != b.regressors.width() {
            return Err(bad(Error::Data("rule input width does not match the regressors".into())));
        }
        b.norm.validate().map_err(bad)?;
        Ok(b)
    }

    /// Features for normalized, clamped regressor rows.
    pub fn features(&self, x: &Rows) -> Result<Rows> {
        match &self.rbm {
            Some(m) => m.transform(x),
            None => Ok(x.clone()),
        }
    }
}

/// Optimizer trace as line-delimited JSON.
pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut text = String::new();
    for r in trace {
        text.push_str(&serde_json::to_string(r).expect("trace record serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write `report.json`, `predictions.csv` (test split), `model.kv` and, for
/// probabilistic runs, `probopt_trace.jsonl` into `dir`.
pub fn write_run(dir: &Path, out: &PipelineOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = dir.join("report.json");
    std::fs::write(&report, out.report.to_json()).map_err(|e| Error::io(&report, e))?;
    write_predictions(
        &dir.join("predictions.csv"),
        out.prepared.test.y(),
        &out.test_pred,
        &out.prepared.norm,
        out.prepared.test_start,
    )?;
    ModelBundle::from_output(out).save(&dir.join("model.kv"))?;
    if let Some(opt) = &out.opt {
        write_trace(&dir.join("probopt_trace.jsonl"), &opt.trace)?;
    }
    Ok(())
}
