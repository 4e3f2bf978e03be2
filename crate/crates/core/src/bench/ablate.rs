use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::pipeline::{self, Assembly, PipelineOutput};
use super::report::RunReport;
use super::PipelineConfig;
use crate::dataset::TimeSeries;
use crate::{Error, Result};

/// Median of a non-empty list; mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One `(use_rbm, use_prob_rules)` cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub use_rbm: bool,
    pub use_prob_rules: bool,
    pub train_mse: Vec<f64>,
    pub test_mse: Vec<f64>,
    pub k: Vec<usize>,
    pub median_train_mse: f64,
    pub median_test_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub seeds: Vec<u64>,
    pub cells: Vec<Cell>,
    pub runs: Vec<RunReport>,
}

impl Ablation {
    pub fn cell(&self, use_rbm: bool, use_prob_rules: bool) -> &Cell {
        self.cells
            .iter()
            .find(|c| c.use_rbm == use_rbm && c.use_prob_rules == use_prob_rules)
            .expect("all four cells are present")
    }

    /// Median MSE table: rows are the rule type, columns the feature
    /// source, each with training and testing values in units of 1e-3.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "MSE x 1e-3 (median over {} seeds)", self.seeds.len());
        let _ = writeln!(s, "{:<26}{:>12}{:>12}{:>12}{:>12}", "", "No RBM", "", "RBM", "");
        let _ = writeln!(s, "{:<26}{:>12}{:>12}{:>12}{:>12}", "", "Training", "Testing", "Training", "Testing");
        for (name, prob) in [("Standard fuzzy rule", false), ("Probabilistic fuzzy rule", true)] {
            let a = self.cell(false, prob);
            let b = self.cell(true, prob);
            let _ = writeln!(
                s,
                "{:<26}{:>12.2}{:>12.2}{:>12.2}{:>12.2}",
                name,
                a.median_train_mse * 1e3,
                a.median_test_mse * 1e3,
                b.median_train_mse * 1e3,
                b.median_test_mse * 1e3
            );
        }
        s
    }
}

/// All four cells for one seed. The cells share the data split and the RBM;
/// each rule type pair shares the clustering and consequents, so the
/// probabilistic cell differs from the standard one only by `P`.
pub fn run_seed(ts: &TimeSeries, base: &PipelineConfig, seed: u64) -> Result<Vec<PipelineOutput>> {
    let cfg = base.clone().with_seed(seed);
    cfg.validate()?;
    let t = Instant::now();
    let prepared = pipeline::prepare(ts, &cfg)?;
    let prepare_ms = t.elapsed().as_secs_f64() * 1e3;
    let rbm = pipeline::train_rbm(&prepared, &cfg)?;
    let mut out = Vec::with_capacity(4);
    for use_rbm in [false, true] {
        let stage = use_rbm.then_some(&rbm);
        let features = pipeline::features(&prepared, stage.map(|r| &r.model))?;
        let rules = pipeline::fit_rules(&features, prepared.train.y(), &cfg)?;
        let prob = pipeline::fit_probabilities(&rules.model, &features, prepared.train.y(), &cfg)?;
        for p in [None, Some(&prob)] {
            out.push(
                Assembly {
                    cfg: &cfg,
                    prepared: &prepared,
                    features: &features,
                    rbm: stage,
                    rules: &rules,
                    prob: p,
                    prepare_ms,
                }
                .finish()?,
            );
        }
    }
    Ok(out)
}

/// Run every cell for every seed and summarize with medians.
pub fn ablate(ts: &TimeSeries, base: &PipelineConfig, seeds: &[u64]) -> Result<Ablation> {
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let mut runs = Vec::with_capacity(4 * seeds.len());
    for &seed in seeds {
        log::info!("ablation seed {seed}");
        runs.extend(run_seed(ts, base, seed)?.into_iter().map(|o| o.report));
    }
    let mut cells = Vec::with_capacity(4);
    for use_prob_rules in [false, true] {
        for use_rbm in [false, true] {
            let mine: Vec<&RunReport> =
                runs.iter().filter(|r| r.use_rbm == use_rbm && r.use_prob_rules == use_prob_rules).collect();
            let train_mse: Vec<f64> = mine.iter().map(|r| r.train.mse).collect();
            let test_mse: Vec<f64> = mine.iter().map(|r| r.test.mse).collect();
            cells.push(Cell {
                use_rbm,
                use_prob_rules,
                median_train_mse: median(&train_mse),
                median_test_mse: median(&test_mse),
                k: mine.iter().map(|r| r.k).collect(),
                train_mse,
                test_mse,
            });
        }
    }
    Ok(Ablation { seeds: seeds.to_vec(), cells, runs })
}
