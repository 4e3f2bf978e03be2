//! Fuzzy rule base with Gaussian antecedents, product inference and
//! center-average defuzzification, plus the probabilistic variant in which
//! each rule spreads its consequent over every consequent set through a
//! row-stochastic matrix `P`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::probcluster::ClusterSummary;
use crate::{Error, Result, Rows};

/// Row sums of `P` must be within this of one.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// `exp(-(h - c)² / σ²)`.
pub fn membership(c: f64, sigma: f64, h: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("membership width must be positive, got {sigma}")));
    }
    Ok(gauss(c, sigma, h))
}

fn gauss(c: f64, sigma: f64, h: f64) -> f64 {
    let z = (h - c) / sigma;
    (-z * z).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyModel {
    k: usize,
    m: usize,
    /// `k × m`, row-major.
    centers: Vec<f64>,
    /// `k × m`, row-major.
    widths: Vec<f64>,
    w: Vec<f64>,
    /// `k × k`, row-major; `p[i][j]` is the probability that rule `i` yields
    /// consequent set `j`.
    p: Vec<f64>,
    sigma_b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildConfig {
    /// Lower bound of the uniform antecedent-width draw.
    pub sigma_min: f64,
    /// Upper bound (exclusive) of the uniform antecedent-width draw.
    pub sigma_max: f64,
    /// Initial consequent width.
    pub sigma_b: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig { sigma_min: 0.05, sigma_max: 1.0, sigma_b: 0.1 }
    }
}

impl FuzzyModel {
    pub fn new(
        centers: Vec<Vec<f64>>,
        widths: Vec<Vec<f64>>,
        w: Vec<f64>,
        p: Vec<Vec<f64>>,
        sigma_b: Vec<f64>,
    ) -> Result<Self> {
        let k = centers.len();
        if k == 0 {
            return Err(Error::Config("a fuzzy model needs at least one rule".into()));
        }
        let m = centers[0].len();
        let flat = |rows: Vec<Vec<f64>>, width: usize| -> Result<Vec<f64>> {
            if rows.len() != k {
                return Err(Error::Dimension { expected: k, got: rows.len() });
            }
            let mut out = Vec::with_capacity(k * width);
            for r in rows {
                if r.len() != width {
                    return Err(Error::Dimension { expected: width, got: r.len() });
                }
                out.extend(r);
            }
            Ok(out)
        };
        let model = FuzzyModel {
            k,
            m,
            centers: flat(centers, m)?,
            widths: flat(widths, m)?,
            w,
            p: flat(p, k)?,
            sigma_b,
        };
        model.validate()?;
        Ok(model)
    }

    /// Check every structural and numerical invariant.
    pub fn validate(&self) -> Result<()> {
        let (k, m) = (self.k, self.m);
        if k == 0 || m == 0 {
            return Err(Error::Config("a fuzzy model needs at least one rule and one input".into()));
        }
        for (len, want) in [
            (self.centers.len(), k * m),
            (self.widths.len(), k * m),
            (self.w.len(), k),
            (self.p.len(), k * k),
            (self.sigma_b.len(), k),
        ] {
            if len != want {
                return Err(Error::Dimension { expected: want, got: len });
            }
        }
        if self.widths.iter().chain(&self.sigma_b).any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("membership widths must be positive".into()));
        }
        if self.centers.iter().chain(&self.w).any(|c| !c.is_finite()) {
            return Err(Error::Numerical("non-finite rule center or consequent".into()));
        }
        check_row_stochastic(&self.p, k)
    }

    /// Rules centered on the cluster centers with widths drawn uniformly
    /// from `[sigma_min, sigma_max)`, `P = I`, zero consequents.
    pub fn build_from_clusters(summary: &ClusterSummary, seed: u64, cfg: &BuildConfig) -> Result<Self> {
        if summary.k() == 0 {
            return Err(Error::Data("no clusters to build rules from".into()));
        }
        if !(cfg.sigma_min > 0.0 && cfg.sigma_min < cfg.sigma_max) {
            return Err(Error::Config(format!(
                "width range [{}, {}) is empty or touches zero",
                cfg.sigma_min, cfg.sigma_max
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = summary.k();
        let widths = summary
            .centers
            .iter()
            .map(|c| c.iter().map(|_| rng.random_range(cfg.sigma_min..cfg.sigma_max)).collect())
            .collect();
        FuzzyModel::new(
            summary.centers.clone(),
            widths,
            vec![0.0; k],
            (0..k).map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            vec![cfg.sigma_b; k],
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j * self.m..(j + 1) * self.m]
    }

    pub fn width(&self, j: usize) -> &[f64] {
        &self.widths[j * self.m..(j + 1) * self.m]
    }

    pub fn consequents(&self) -> &[f64] {
        &self.w
    }

    /// `P` row-major.
    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn p_row(&self, i: usize) -> &[f64] {
        &self.p[i * self.k..(i + 1) * self.k]
    }

    pub fn sigma_b(&self) -> &[f64] {
        &self.sigma_b
    }

    pub fn set_consequents(&mut self, w: Vec<f64>) -> Result<()> {
        if w.len() != self.k {
            return Err(Error::Dimension { expected: self.k, got: w.len() });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite consequent".into()));
        }
        self.w = w;
        Ok(())
    }

    /// Replace `P` (row-major `k × k`).
    pub fn set_probabilities(&mut self, p: Vec<f64>) -> Result<()> {
        if p.len() != self.k * self.k {
            return Err(Error::Dimension { expected: self.k * self.k, got: p.len() });
        }
        check_row_stochastic(&p, self.k)?;
        self.p = p;
        Ok(())
    }

    pub fn set_sigma_b(&mut self, sigma_b: Vec<f64>) -> Result<()> {
        if sigma_b.len() != self.k {
            return Err(Error::Dimension { expected: self.k, got: sigma_b.len() });
        }
        if sigma_b.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("consequent widths must be positive".into()));
        }
        self.sigma_b = sigma_b;
        Ok(())
    }

    fn check_input(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.m {
            return Err(Error::Dimension { expected: self.m, got: h.len() });
        }
        Ok(())
    }

    /// Normalized product firing strengths. Falls back to the uniform vector
    /// when every rule's product underflows to zero.
    pub fn firing_strengths(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.check_input(h)?;
        let mut phi: Vec<f64> = (0..self.k)
            .map(|j| {
                self.center(j).iter().zip(self.width(j)).zip(h).map(|((&c, &s), &x)| gauss(c, s, x)).product()
            })
            .collect();
        let total: f64 = phi.iter().sum();
        if total > 0.0 {
            phi.iter_mut().for_each(|v| *v /= total);
        } else {
            log::debug!("no rule fires; using uniform firing strengths");
            phi.fill(1.0 / self.k as f64);
        }
        Ok(phi)
    }

    /// `ŷ = Σ_j w_j φ_j`.
    pub fn infer_standard(&self, h: &[f64]) -> Result<f64> {
        let phi = self.firing_strengths(h)?;
        Ok(phi.iter().zip(&self.w).map(|(a, b)| a * b).sum())
    }

    /// `p(B^j | h) = Σ_i φ_i p_ij`.
    pub fn rule_probabilities(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mix(&self.firing_strengths(h)?))
    }

    /// `Pᵀφ` for a given firing vector.
    pub fn mix(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (i, &f) in phi.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(self.p_row(i)) {
                *o += f * p;
            }
        }
        out
    }

    /// `ŷ = Σ_j w_j Σ_i φ_i p_ij`.
    pub fn infer_probabilistic(&self, h: &[f64]) -> Result<f64> {
        let q = self.rule_probabilities(h)?;
        Ok(q.iter().zip(&self.w).map(|(a, b)| a * b).sum())
    }

    /// Firing vectors of every row, one per output row.
    pub fn firing_matrix(&self, features: &Rows) -> Result<Rows> {
        let mut out = Vec::with_capacity(features.len() * self.k);
        for h in features.iter() {
            out.extend(self.firing_strengths(h)?);
        }
        Rows::new(out, self.k)
    }

    /// Predictions for every row with either inference rule.
    pub fn predict(&self, features: &Rows, probabilistic: bool) -> Result<Vec<f64>> {
        features
            .iter()
            .map(|h| if probabilistic { self.infer_probabilistic(h) } else { self.infer_standard(h) })
            .collect()
    }
}

/// Every entry nonnegative and every row summing to one.
pub fn check_row_stochastic(p: &[f64], k: usize) -> Result<()> {
    for (i, row) in p.chunks_exact(k).enumerate() {
        if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Numerical(format!("row {i} of P has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Numerical(format!("row {i} of P sums to {s}")));
        }
    }
    Ok(())
}
