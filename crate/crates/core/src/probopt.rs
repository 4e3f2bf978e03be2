//! Maximum-likelihood estimation of the rule probability matrix `P`.
//!
//! Each consequent set `B^j` is a Gaussian centered on `w_j` with width
//! `σ_B_j`, normalized into a density. Given firing vectors `φ(k)`, the
//! conditional density of a target is the mixture
//! `p(y|h) = Σ_j p(y|B^j) Σ_i φ_i p_ij`, and the objective is the sum of
//! its logs over the training set. The objective is concave in `P`, so
//! projected gradient ascent over the product of row simplices reaches the
//! global optimum.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::fuzzy::FuzzyModel;
use crate::{Error, Result, Rows};

/// Densities are floored here before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// `exp(-(y - c)²/σ²) / (√π σ)`.
pub fn y_given_b(y: f64, c: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("consequent width must be positive, got {sigma}")));
    }
    Ok(gauss_density(y, c, sigma))
}

fn gauss_density(y: f64, c: f64, sigma: f64) -> f64 {
    let z = (y - c) / sigma;
    (-z * z).exp() / (std::f64::consts::PI.sqrt() * sigma)
}

/// Conditional density `p(y | h)` of the probabilistic model.
pub fn y_density(y: f64, h: &[f64], model: &FuzzyModel) -> Result<f64> {
    let q = model.rule_probabilities(h)?;
    Ok(q.iter()
        .zip(model.consequents())
        .zip(model.sigma_b())
        .map(|((q, &c), &s)| q * gauss_density(y, c, s))
        .sum())
}

/// Training data for the likelihood with the consequent densities
/// precomputed.
#[derive(Debug, Clone)]
pub struct LikelihoodContext {
    k: usize,
    /// `N × K` firing vectors.
    phi: Array2<f64>,
    /// `N × K`: `p(y(k) | B^j)`.
    dens: Array2<f64>,
}

impl LikelihoodContext {
    pub fn new(phi: Rows, y: &[f64], centers: &[f64], sigma_b: &[f64]) -> Result<Self> {
        let k = phi.width();
        if phi.len() != y.len() {
            return Err(Error::Dimension { expected: phi.len(), got: y.len() });
        }
        if centers.len() != k {
            return Err(Error::Dimension { expected: k, got: centers.len() });
        }
        if sigma_b.len() != k {
            return Err(Error::Dimension { expected: k, got: sigma_b.len() });
        }
        if sigma_b.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("consequent widths must be positive".into()));
        }
        let n = y.len();
        let dens = Array2::from_shape_fn((n, k), |(r, j)| gauss_density(y[r], centers[j], sigma_b[j]));
        let phi = Array2::from_shape_vec((n, k), phi.as_slice().to_vec()).expect("rows are n × k");
        Ok(LikelihoodContext { k, phi, dens })
    }

    /// Context for a model's rule base on a feature set.
    pub fn from_model(model: &FuzzyModel, features: &Rows, y: &[f64]) -> Result<Self> {
        LikelihoodContext::new(model.firing_matrix(features)?, y, model.consequents(), model.sigma_b())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.phi.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn matrix(&self, p: &[f64]) -> Result<Array2<f64>> {
        if p.len() != self.k * self.k {
            return Err(Error::Dimension { expected: self.k * self.k, got: p.len() });
        }
        Ok(Array2::from_shape_vec((self.k, self.k), p.to_vec()).expect("length checked"))
    }

    /// `p(y(k)|h(k)) = Σ_j (φ(k)ᵀP)_j p(y(k)|B^j)` for every sample.
    fn densities(&self, p: &Array2<f64>) -> Vec<f64> {
        (self.phi.dot(p) * &self.dens).sum_axis(Axis(1)).to_vec()
    }

    /// `L(P) = Σ_k ln max(p(y(k)|h(k)), floor)`.
    pub fn log_likelihood(&self, p: &[f64]) -> Result<f64> {
        let p = self.matrix(p)?;
        Ok(self.densities(&p).into_iter().map(|v| v.max(DENSITY_FLOOR).ln()).sum())
    }

    /// Gradient with respect to the free parameters `p_ij`, `j < K`, with
    /// `p_iK = 1 - Σ_{j<K} p_ij` eliminated. Row-major `K × (K - 1)`.
    pub fn grad(&self, p: &[f64]) -> Result<Vec<f64>> {
        let pm = self.matrix(p)?;
        let k = self.k;
        let inv: Vec<f64> =
            self.densities(&pm).into_iter().map(|v| if v < DENSITY_FLOOR { 0.0 } else { 1.0 / v }).collect();
        let mut scaled = self.dens.clone();
        for (mut row, w) in scaled.rows_mut().into_iter().zip(&inv) {
            row *= *w;
        }
        // ∂L/∂p_ij = Σ_k φ_i(k) p(y(k)|B^j) / p(y(k)|h(k)).
        let full = self.phi.t().dot(&scaled);
        let mut g = Vec::with_capacity(k * (k - 1));
        for i in 0..k {
            let last = full[[i, k - 1]];
            g.extend((0..k - 1).map(|j| full[[i, j]] - last));
        }
        Ok(g)
    }
}

/// Free parameters: the first `K - 1` columns of `P`.
pub fn to_free(p: &[f64], k: usize) -> Vec<f64> {
    p.chunks_exact(k).flat_map(|r| r[..k - 1].iter().copied()).collect()
}

/// Full `P` from free parameters, rebuilding the last column.
pub fn from_free(v: &[f64], k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let mut p = Vec::with_capacity(k * k);
    for row in v.chunks_exact(k - 1) {
        p.extend_from_slice(row);
        p.push((1.0 - row.iter().sum::<f64>()).max(0.0));
    }
    p
}

/// Euclidean projection onto `{v ≥ 0, Σv ≤ 1}`.
pub fn project_capped_simplex(v: &mut [f64]) {
    let clipped: f64 = v.iter().map(|x| x.max(0.0)).sum();
    if clipped <= 1.0 {
        v.iter_mut().for_each(|x| *x = x.max(0.0));
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        acc += s;
        let t = (acc - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

fn project_rows(v: &mut [f64], k: usize) {
    if k > 1 {
        v.chunks_exact_mut(k - 1).for_each(project_capped_simplex);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub rel_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions { max_iters: 500, grad_tol: 1e-6, rel_tol: 1e-9, initial_step: 1.0, shrink: 0.5, armijo: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Stationary,
    SmallImprovement,
    MaxIterations,
    LineSearchFailed,
    SingleRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub log_likelihood: f64,
    pub step: f64,
    pub projected_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    /// Row-major `K × K`.
    pub p: Vec<f64>,
    pub initial_log_likelihood: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub trace: Vec<TraceRecord>,
}

/// Projected gradient ascent on `L(P)` with Armijo backtracking. The
/// starting point is projected onto the feasible set first.
pub fn optimize_p(ctx: &LikelihoodContext, init: &[f64], opts: &OptOptions) -> Result<OptResult> {
    ctx.matrix(init)?;
    let k = ctx.k;
    if k == 1 {
        let l = ctx.log_likelihood(&[1.0])?;
        return Ok(OptResult {
            p: vec![1.0],
            initial_log_likelihood: l,
            log_likelihood: l,
            iterations: 0,
            stop: StopReason::SingleRule,
            trace: Vec::new(),
        });
    }
    let mut x = to_free(init, k);
    project_rows(&mut x, k);
    let mut l = ctx.log_likelihood(&from_free(&x, k))?;
    let initial = l;
    let mut trace = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    let mut last_step = opts.initial_step;
    for it in 0..opts.max_iters {
        let g = ctx.grad(&from_free(&x, k))?;
        let mut probe: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b).collect();
        project_rows(&mut probe, k);
        let pg_norm = probe.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if pg_norm < opts.grad_tol {
            trace.push(TraceRecord { iteration: it, log_likelihood: l, step: 0.0, projected_grad_norm: pg_norm });
            stop = StopReason::Stationary;
            break;
        }
        // Start from twice the last accepted step, capped at the initial one.
        let mut step = (2.0 * last_step).min(opts.initial_step);
        let accepted = loop {
            let mut cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
            project_rows(&mut cand, k);
            let lc = ctx.log_likelihood(&from_free(&cand, k))?;
            let ascent: f64 = g.iter().zip(cand.iter().zip(&x)).map(|(gi, (c, xi))| gi * (c - xi)).sum();
            if lc.is_finite() && lc >= l + opts.armijo * ascent && lc >= l {
                break Some((cand, lc));
            }
            if cand == x || step == 0.0 {
                break None;
            }
            step *= opts.shrink;
        };
        iterations = it + 1;
        let Some((cand, lc)) = accepted else {
            trace.push(TraceRecord { iteration: it, log_likelihood: l, step: 0.0, projected_grad_norm: pg_norm });
            stop = StopReason::LineSearchFailed;
            break;
        };
        let rel = (lc - l).abs() / l.abs().max(1.0);
        x = cand;
        l = lc;
        last_step = step;
        trace.push(TraceRecord { iteration: it, log_likelihood: l, step, projected_grad_norm: pg_norm });
        log::trace!("probopt iter {it}: L={l:.10e} step={step:.3e} |pg|={pg_norm:.3e}");
        if rel < opts.rel_tol {
            stop = StopReason::SmallImprovement;
            break;
        }
    }
    let p = from_free(&x, k);
    crate::fuzzy::check_row_stochastic(&p, k)?;
    Ok(OptResult { p, initial_log_likelihood: initial, log_likelihood: l, iterations, stop, trace })
}

/// Per-cluster population standard deviation of the member targets,
/// floored at `floor`.
pub fn sigma_b_from_labels(labels: &[usize], y: &[f64], k: usize, floor: f64) -> Result<Vec<f64>> {
    if labels.len() != y.len() {
        return Err(Error::Dimension { expected: labels.len(), got: y.len() });
    }
    let mut sum = vec![0.0; k];
    let mut sq = vec![0.0; k];
    let mut n = vec![0usize; k];
    for (&l, &v) in labels.iter().zip(y) {
        if l >= k {
            return Err(Error::Data(format!("label {l} out of range for {k} clusters")));
        }
        sum[l] += v;
        sq[l] += v * v;
        n[l] += 1;
    }
    Ok((0..k)
        .map(|j| {
            if n[j] == 0 {
                return floor;
            }
            let mean = sum[j] / n[j] as f64;
            let var = (sq[j] / n[j] as f64 - mean * mean).max(0.0);
            var.sqrt().max(floor)
        })
        .collect())
}
