//! Restricted Boltzmann machine with binary hidden units and continuous
//! visible units on `[0, 1]`, trained by contrastive divergence.
//!
//! Energy: `E(x, h) = -hᵀVx - bᵀx - cᵀh`. The hidden conditional is
//! Bernoulli with mean `sigmoid(Vx + c)`; the visible conditional is the
//! truncated exponential of [`visible`] with activation `Vᵀh + b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rows};

pub mod visible;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmModel {
    hidden: usize,
    visible: usize,
    /// `hidden × visible`, row-major.
    v: Vec<f64>,
    b_vis: Vec<f64>,
    c_hid: Vec<f64>,
}

/// Gradient of the free energy with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmGrad {
    pub v: Vec<f64>,
    pub b_vis: Vec<f64>,
    pub c_hid: Vec<f64>,
}

impl RbmModel {
    pub fn new(hidden: usize, visible: usize, v: Vec<f64>, b_vis: Vec<f64>, c_hid: Vec<f64>) -> Result<Self> {
        let model = RbmModel { hidden, visible, v, b_vis, c_hid };
        model.validate()?;
        Ok(model)
    }

    /// Check dimensions and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.visible == 0 {
            return Err(Error::Config("RBM needs at least one hidden and one visible unit".into()));
        }
        for (len, want) in [
            (self.v.len(), self.hidden * self.visible),
            (self.b_vis.len(), self.visible),
            (self.c_hid.len(), self.hidden),
        ] {
            if len != want {
                return Err(Error::Dimension { expected: want, got: len });
            }
        }
        self.check_finite()
    }

    pub fn zeros(hidden: usize, visible: usize) -> Result<Self> {
        RbmModel::new(hidden, visible, vec![0.0; hidden * visible], vec![0.0; visible], vec![0.0; hidden])
    }

    /// Gaussian weights with standard deviation `scale`, zero biases.
    pub fn random(hidden: usize, visible: usize, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        let normal = Normal::new(0.0, scale).map_err(|e| Error::Config(format!("init scale {scale}: {e}")))?;
        let v = (0..hidden * visible).map(|_| normal.sample(rng)).collect();
        RbmModel::new(hidden, visible, v, vec![0.0; visible], vec![0.0; hidden])
    }

    fn check_finite(&self) -> Result<()> {
        if self.v.iter().chain(&self.b_vis).chain(&self.c_hid).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numerical("RBM parameters became non-finite".into()))
        }
    }

    pub fn hidden_len(&self) -> usize {
        self.hidden
    }

    pub fn visible_len(&self) -> usize {
        self.visible
    }

    pub fn weights(&self) -> &[f64] {
        &self.v
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.v[i * self.visible + j]
    }

    pub fn b_vis(&self) -> &[f64] {
        &self.b_vis
    }

    pub fn c_hid(&self) -> &[f64] {
        &self.c_hid
    }

    fn check_visible(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.visible {
            return Err(Error::Dimension { expected: self.visible, got: x.len() });
        }
        Ok(())
    }

    fn check_hidden(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.hidden {
            return Err(Error::Dimension { expected: self.hidden, got: h.len() });
        }
        Ok(())
    }

    /// `(Vx)_i + c_i` for every hidden unit.
    fn hidden_pre<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.v
            .chunks_exact(self.visible)
            .zip(&self.c_hid)
            .map(move |(row, c)| row.iter().zip(x).map(|(w, xv)| w * xv).sum::<f64>() + c)
    }

    /// `p(h_i = 1 | x) = sigmoid((Vx)_i + c_i)`.
    pub fn hidden_probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_visible(x)?;
        Ok(self.hidden_pre(x).map(sigmoid).collect())
    }

    /// Bernoulli draw of the hidden layer: unit `i` is on when a fresh
    /// uniform threshold falls below its probability.
    pub fn sample_hidden(&self, x: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
        let p = self.hidden_probs(x)?;
        Ok(p.into_iter().map(|p| if rng.random::<f64>() < p { 1.0 } else { 0.0 }).collect())
    }

    /// Visible activations `a_j = (Vᵀh)_j + b_j`.
    pub fn visible_activation(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.check_hidden(h)?;
        let mut a = self.b_vis.clone();
        for (row, &hi) in self.v.chunks_exact(self.visible).zip(h) {
            if hi != 0.0 {
                for (aj, w) in a.iter_mut().zip(row) {
                    *aj += w * hi;
                }
            }
        }
        Ok(a)
    }

    /// Inverse-CDF draw of every visible unit given a hidden state.
    pub fn sample_visible(&self, h: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
        let a = self.visible_activation(h)?;
        Ok(a.into_iter().map(|a| visible::inverse_cdf(a, rng.random::<f64>())).collect())
    }

    /// `E[x | h]` componentwise.
    pub fn expected_visible(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.visible_activation(h)?.into_iter().map(visible::expected).collect())
    }

    /// Joint energy of a visible vector and a hidden state.
    pub fn energy(&self, x: &[f64], h: &[f64]) -> Result<f64> {
        self.check_visible(x)?;
        self.check_hidden(h)?;
        let mut e = -self.b_vis.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        for ((row, c), &hi) in self.v.chunks_exact(self.visible).zip(&self.c_hid).zip(h) {
            e -= hi * (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + c);
        }
        Ok(e)
    }

    /// `F(x) = -bᵀx - Σ_i softplus((Vx)_i + c_i)`.
    pub fn free_energy(&self, x: &[f64]) -> Result<f64> {
        self.check_visible(x)?;
        let lin: f64 = self.b_vis.iter().zip(x).map(|(b, v)| b * v).sum();
        Ok(-lin - self.hidden_pre(x).map(softplus).sum::<f64>())
    }

    /// `∂F/∂V = -p(h|x) xᵀ`, `∂F/∂b = -x`, `∂F/∂c = -p(h|x)`.
    pub fn free_energy_grad(&self, x: &[f64]) -> Result<RbmGrad> {
        let p = self.hidden_probs(x)?;
        let v = p.iter().flat_map(|pi| x.iter().map(move |xj| -pi * xj)).collect();
        Ok(RbmGrad { v, b_vis: x.iter().map(|v| -v).collect(), c_hid: p.iter().map(|v| -v).collect() })
    }

    /// `k` steps of block Gibbs sampling starting from `x`.
    pub fn gibbs_chain(&self, x: &[f64], k: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let mut cur = x.to_vec();
        for _ in 0..k {
            let h = self.sample_hidden(&cur, rng)?;
            cur = self.sample_visible(&h, rng)?;
        }
        Ok(cur)
    }

    /// Mean-field reconstruction `E[x | p(h|x)]`.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.expected_visible(&self.hidden_probs(x)?)
    }

    /// Mean squared reconstruction error `‖x - E[x|p(h|x)]‖²` over rows.
    pub fn reconstruction_error(&self, data: &Rows) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Data("no rows to reconstruct".into()));
        }
        let mut total = 0.0;
        for x in data.iter() {
            let r = self.reconstruct(x)?;
            total += x.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        Ok(total / data.len() as f64)
    }

    /// Hidden probabilities for every row.
    pub fn transform(&self, data: &Rows) -> Result<Rows> {
        if data.width() != self.visible {
            return Err(Error::Dimension { expected: self.visible, got: data.width() });
        }
        let mut out = Vec::with_capacity(data.len() * self.hidden);
        for x in data.iter() {
            out.extend(self.hidden_pre(x).map(sigmoid));
        }
        Rows::new(out, self.hidden)
    }
}

/// One contrastive-divergence update with a caller-supplied reconstruction
/// `x ↦ x̃`. Statistics are averaged over the batch:
///
/// `ΔV = η(p(h|x)xᵀ - p(h|x̃)x̃ᵀ)`, `Δb = η(x - x̃)`, `Δc = η(p(h|x) - p(h|x̃))`.
pub fn cd_step_with<F>(model: &mut RbmModel, batch: &[&[f64]], eta: f64, mut reconstruct: F) -> Result<()>
where
    F: FnMut(&RbmModel, &[f64]) -> Result<Vec<f64>>,
{
    if batch.is_empty() {
        return Ok(());
    }
    let (m, n) = (model.hidden, model.visible);
    let mut dv = vec![0.0; m * n];
    let mut db = vec![0.0; n];
    let mut dc = vec![0.0; m];
    for &x in batch {
        model.check_visible(x)?;
        let xt = reconstruct(model, x)?;
        model.check_visible(&xt)?;
        let ph = model.hidden_probs(x)?;
        let pt = model.hidden_probs(&xt)?;
        for i in 0..m {
            let row = &mut dv[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] += ph[i] * x[j] - pt[i] * xt[j];
            }
            dc[i] += ph[i] - pt[i];
        }
        for j in 0..n {
            db[j] += x[j] - xt[j];
        }
    }
    let s = eta / batch.len() as f64;
    model.v.iter_mut().zip(&dv).for_each(|(p, d)| *p += s * d);
    model.b_vis.iter_mut().zip(&db).for_each(|(p, d)| *p += s * d);
    model.c_hid.iter_mut().zip(&dc).for_each(|(p, d)| *p += s * d);
    model.check_finite()
}

/// CD-k update with reconstructions drawn by `k` Gibbs steps.
pub fn cd_step(model: &mut RbmModel, batch: &[&[f64]], eta: f64, k: usize, rng: &mut impl Rng) -> Result<()> {
    cd_step_with(model, batch, eta, |m, x| m.gibbs_chain(x, k, rng))
}

/// CD-1 update.
pub fn cd1_step(model: &mut RbmModel, batch: &[&[f64]], eta: f64, rng: &mut impl Rng) -> Result<()> {
    cd_step(model, batch, eta, 1, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub gibbs_steps: usize,
    pub seed: u64,
    pub init_scale: f64,
    /// Hidden width; `None` uses the visible width.
    pub hidden_units: Option<usize>,
    pub batch_size: usize,
}

impl Default for RbmTrainConfig {
    fn default() -> Self {
        RbmTrainConfig {
            learning_rate: 0.2,
            epochs: 10,
            gibbs_steps: 1,
            seed: 0,
            init_scale: 0.01,
            hidden_units: None,
            batch_size: 1,
        }
    }
}

impl RbmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 || self.gibbs_steps == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs, gibbs_steps and batch_size must be at least 1".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(format!("init scale must be nonnegative, got {}", self.init_scale)));
        }
        if self.hidden_units == Some(0) {
            return Err(Error::Config("hidden width must be at least 1".into()));
        }
        Ok(())
    }
}

/// Trained model and the reconstruction error before training and after
/// each epoch.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: RbmModel,
    pub recon_error: Vec<f64>,
}

/// Sequential CD training over `data` in row order.
pub fn train(data: &Rows, cfg: &RbmTrainConfig) -> Result<Trained> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("cannot train an RBM on an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = data.width();
    let mut model = RbmModel::random(cfg.hidden_units.unwrap_or(n), n, cfg.init_scale, &mut rng)?;
    let mut recon_error = vec![model.reconstruction_error(data)?];
    let rows: Vec<&[f64]> = data.iter().collect();
    for epoch in 0..cfg.epochs {
        for batch in rows.chunks(cfg.batch_size) {
            cd_step(&mut model, batch, cfg.learning_rate, cfg.gibbs_steps, &mut rng)?;
        }
        let err = model.reconstruction_error(data)?;
        log::debug!("rbm epoch {} reconstruction error {err:.6}", epoch + 1);
        recon_error.push(err);
    }
    Ok(Trained { model, recon_error })
}
