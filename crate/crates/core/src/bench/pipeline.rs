use std::time::Instant;

use super::report::{Errors, ProbSummary, RunReport, SplitCounts, Timings};
use super::{PipelineConfig, Source};
use crate::crbm::{self, RbmModel};
use crate::dataset::{self, synth, Prepared, TimeSeries};
use crate::error::StageExt;
use crate::fuzzy::FuzzyModel;
use crate::probcluster::{self, SweepStats};
use crate::probopt::{self, LikelihoodContext, OptResult};
use crate::{elm, Error, Result, Rows, Stage};

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// The series named by the data config: the CSV file when a path is set,
/// otherwise the built-in source.
pub fn load_series(cfg: &PipelineConfig) -> Result<TimeSeries> {
    let d = &cfg.data;
    match &d.path {
        Some(p) => dataset::load_csv(p, &d.u_column, &d.y_column),
        None => match d.source {
            Source::GasFurnace => Ok(dataset::gas_furnace()),
            Source::WhSurrogate => synth::wiener_hammerstein(d.surrogate_len, d.surrogate_seed),
        },
    }
    .stage(Stage::Ingest)
}

/// Build, split and normalize the regressors.
pub fn prepare(ts: &TimeSeries, cfg: &PipelineConfig) -> Result<Prepared> {
    let d = &cfg.data;
    let rows = ts.len().saturating_sub(cfg.regressors.lag());
    let test_start = d.test_start.unwrap_or(d.n_train).max(d.n_train);
    let test_end = d.n_test.map_or(rows, |n| (test_start + n).min(rows));
    if d.n_train >= rows || test_start >= rows {
        return Err(Error::Data(format!(
            "{} training rows starting tests at row {test_start} do not fit in {rows} regressor rows",
            d.n_train
        )))
        .stage(Stage::Regressors);
    }
    dataset::prepare_ranges(ts, cfg.regressors, 0..d.n_train, test_start..test_end, d.norm_scope)
        .stage(Stage::Normalize)
}

/// Trained RBM with its reconstruction history.
#[derive(Debug, Clone)]
pub struct RbmStage {
    pub model: RbmModel,
    pub recon_error: Vec<f64>,
    pub elapsed_ms: f64,
}

pub fn train_rbm(prepared: &Prepared, cfg: &PipelineConfig) -> Result<RbmStage> {
    let t = Instant::now();
    let trained = crbm::train(prepared.train.x(), &cfg.rbm).stage(Stage::Rbm)?;
    Ok(RbmStage { model: trained.model, recon_error: trained.recon_error, elapsed_ms: ms(t) })
}

/// Inputs to clustering and the fuzzy model: hidden probabilities when an
/// RBM is given, the normalized regressors otherwise.
#[derive(Debug, Clone)]
pub struct Features {
    pub train: Rows,
    pub test: Rows,
}

pub fn features(prepared: &Prepared, rbm: Option<&RbmModel>) -> Result<Features> {
    match rbm {
        Some(m) => Ok(Features {
            train: m.transform(prepared.train.x()).stage(Stage::Rbm)?,
            test: m.transform(prepared.test.x()).stage(Stage::Rbm)?,
        }),
        None => Ok(Features { train: prepared.train.x().clone(), test: prepared.test.x().clone() }),
    }
}

/// Rule base with `P = I`, consequents solved, `σ_B` set from the clusters.
#[derive(Debug, Clone)]
pub struct RuleFit {
    pub model: FuzzyModel,
    pub labels: Vec<usize>,
    pub sweeps: Vec<SweepStats>,
    pub cluster_sizes: Vec<usize>,
    pub clustering_ms: f64,
    pub consequents_ms: f64,
}

pub fn fit_rules(features: &Features, y: &[f64], cfg: &PipelineConfig) -> Result<RuleFit> {
    let t = Instant::now();
    let fit = probcluster::fit(&features.train, &cfg.cluster).stage(Stage::Clustering)?;
    let clustering_ms = ms(t);
    log::info!("clustering found {} rules", fit.summary.k());

    let t = Instant::now();
    let labels = fit.labels();
    let mut model = FuzzyModel::build_from_clusters(&fit.summary, cfg.width_seed(), &cfg.fuzzy)
        .stage(Stage::Consequents)?;
    let phi = model.firing_matrix(&features.train).stage(Stage::Consequents)?;
    let w = elm::solve_rows(&phi, y).stage(Stage::Consequents)?;
    model.set_consequents(w).stage(Stage::Consequents)?;
    let sigma_b = probopt::sigma_b_from_labels(&labels, y, model.k(), cfg.probopt.sigma_b_floor)
        .stage(Stage::Consequents)?;
    model.set_sigma_b(sigma_b).stage(Stage::Consequents)?;
    Ok(RuleFit {
        model,
        labels,
        sweeps: fit.sweeps,
        cluster_sizes: fit.summary.counts,
        clustering_ms,
        consequents_ms: ms(t),
    })
}

/// Probabilistic rule base from a standard one.
#[derive(Debug, Clone)]
pub struct ProbFit {
    pub model: FuzzyModel,
    pub opt: OptResult,
    pub elapsed_ms: f64,
}

/// Maximize the likelihood over `P` from `P = I`, optionally re-solving the
/// consequents with the optimized `P`.
pub fn fit_probabilities(rules: &FuzzyModel, features: &Features, y: &[f64], cfg: &PipelineConfig) -> Result<ProbFit> {
    let t = Instant::now();
    let run = || -> Result<ProbFit> {
        let ctx = LikelihoodContext::from_model(rules, &features.train, y)?;
        let init = rules.probabilities().to_vec();
        let opt = probopt::optimize_p(&ctx, &init, &cfg.probopt.optimizer)?;
        let mut model = rules.clone();
        model.set_probabilities(opt.p.clone())?;
        if cfg.probopt.resolve_w {
            let phi = model.firing_matrix(&features.train)?;
            let mixed = phi.map(|row| model.mix(row))?;
            model.set_consequents(elm::solve_rows(&mixed, y)?)?;
        }
        Ok(ProbFit { model, opt, elapsed_ms: 0.0 })
    };
    let mut out = run().stage(Stage::Probabilities)?;
    out.elapsed_ms = ms(t);
    log::info!(
        "probability fit: L {:.4} -> {:.4} in {} iterations ({:?})",
        out.opt.initial_log_likelihood,
        out.opt.log_likelihood,
        out.opt.iterations,
        out.opt.stop
    );
    Ok(out)
}

/// Everything produced by one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub model: FuzzyModel,
    pub rbm: Option<RbmModel>,
    pub report: RunReport,
    pub opt: Option<OptResult>,
    pub prepared: Prepared,
    pub features: Features,
    pub train_pred: Vec<f64>,
    pub test_pred: Vec<f64>,
}

/// Shared pieces for assembling a report.
pub(crate) struct Assembly<'a> {
    pub cfg: &'a PipelineConfig,
    pub prepared: &'a Prepared,
    pub features: &'a Features,
    pub rbm: Option<&'a RbmStage>,
    pub rules: &'a RuleFit,
    pub prob: Option<&'a ProbFit>,
    pub prepare_ms: f64,
}

impl Assembly<'_> {
    pub fn finish(self) -> Result<PipelineOutput> {
        let t = Instant::now();
        let probabilistic = self.prob.is_some();
        let model = self.prob.map_or(&self.rules.model, |p| &p.model);
        let train_pred = model.predict(&self.features.train, probabilistic).stage(Stage::Evaluate)?;
        let test_pred = model.predict(&self.features.test, probabilistic).stage(Stage::Evaluate)?;
        let span = self.prepared.norm.y_span();
        let train = Errors::of(self.prepared.train.y(), &train_pred, span);
        let test = Errors::of(self.prepared.test.y(), &test_pred, span);
        if !(train.mse.is_finite() && test.mse.is_finite()) {
            return Err(Error::Numerical("non-finite prediction error".into())).stage(Stage::Evaluate);
        }
        let timings_ms = Timings {
            prepare: self.prepare_ms,
            rbm: self.rbm.map_or(0.0, |r| r.elapsed_ms),
            clustering: self.rules.clustering_ms,
            consequents: self.rules.consequents_ms,
            probabilities: self.prob.map_or(0.0, |p| p.elapsed_ms),
            evaluate: ms(t),
        };
        let mut config = self.cfg.clone();
        config.run.use_rbm = self.rbm.is_some();
        config.run.use_prob_rules = probabilistic;
        let report = RunReport {
            seed: self.cfg.run.seed,
            use_rbm: self.rbm.is_some(),
            use_prob_rules: probabilistic,
            train,
            test,
            k: model.k(),
            cluster_sizes: self.rules.cluster_sizes.clone(),
            sweeps: self.rules.sweeps.clone(),
            rbm_recon_error: self.rbm.map(|r| r.recon_error.clone()),
            probopt: self.prob.map(|p| ProbSummary {
                initial_log_likelihood: p.opt.initial_log_likelihood,
                log_likelihood: p.opt.log_likelihood,
                iterations: p.opt.iterations,
                stop: p.opt.stop,
            }),
            split: SplitCounts {
                raw_pairs: self.prepared.raw_pairs,
                regressor_rows: self.prepared.regressor_rows,
                train_rows: self.prepared.train.len(),
                test_rows: self.prepared.test.len(),
                raw_test_pairs: self.prepared.raw_pairs - self.prepared.train.len(),
                clamped_test_entries: self.prepared.test.clamped_entries(),
            },
            timings_ms,
            config,
        };
        Ok(PipelineOutput {
            model: model.clone(),
            rbm: self.rbm.map(|r| r.model.clone()),
            report,
            opt: self.prob.map(|p| p.opt.clone()),
            prepared: self.prepared.clone(),
            features: self.features.clone(),
            train_pred,
            test_pred,
        })
    }
}

/// Regressors, normalization, optional RBM, clustering, consequents,
/// optional probability fit and evaluation on both splits.
pub fn run_pipeline(ts: &TimeSeries, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let t = Instant::now();
    let prepared = prepare(ts, cfg)?;
    let prepare_ms = ms(t);
    let rbm = if cfg.run.use_rbm { Some(train_rbm(&prepared, cfg)?) } else { None };
    let features = features(&prepared, rbm.as_ref().map(|r| &r.model))?;
    let rules = fit_rules(&features, prepared.train.y(), cfg)?;
    let prob = if cfg.run.use_prob_rules {
        Some(fit_probabilities(&rules.model, &features, prepared.train.y(), cfg)?)
    } else {
        None
    };
    Assembly {
        cfg,
        prepared: &prepared,
        features: &features,
        rbm: rbm.as_ref(),
        rules: &rules,
        prob: prob.as_ref(),
        prepare_ms,
    }
    .finish()
}
