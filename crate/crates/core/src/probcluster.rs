//! Probability-based clustering of hidden-feature vectors.
//!
//! Labels are Gibbs-sampled one sample at a time. The prior over seatings is
//! a Chinese restaurant process, the likelihood of cluster `j` is
//! `exp(hᵀδ_j - λ‖δ_j‖²)`, and after each draw the cluster parameters get a
//! passive-aggressive max-margin correction towards the sampled label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Rows};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Concentration, in `(0, 1)`.
    pub alpha: f64,
    /// Strength, positive.
    pub psi: f64,
    /// Penalty on `‖δ‖²`.
    pub lambda: f64,
    /// Passive-aggressive step cap.
    pub c: f64,
    pub sweeps: usize,
    /// A new cluster is forced when every existing normalized probability
    /// falls below this.
    pub new_cluster_threshold: f64,
    /// Degrees of freedom of the proposal for a new cluster's parameters.
    pub t_dof: u32,
    /// Scale applied to each Student-t proposal component.
    pub t_scale: f64,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            alpha: 0.8,
            psi: 10.0,
            lambda: 5.0,
            c: 0.001,
            sweeps: 3,
            new_cluster_threshold: 0.01,
            t_dof: 3,
            t_scale: 0.1,
            seed: 0,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("clustering: {what}")));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.psi > 0.0 && self.psi.is_finite()) {
            return bad("psi must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be nonnegative");
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad("C must be positive");
        }
        if self.sweeps == 0 {
            return bad("sweeps must be at least 1");
        }
        if !(self.new_cluster_threshold > 0.0 && self.new_cluster_threshold < 1.0) {
            return bad("new-cluster threshold must lie in (0, 1)");
        }
        if self.t_dof == 0 {
            return bad("t degrees of freedom must be at least 1");
        }
        if !(self.t_scale > 0.0 && self.t_scale.is_finite()) {
            return bad("t scale must be positive");
        }
        Ok(())
    }
}

/// Cluster parameters, per-sample labels and per-cluster counts. Clusters may
/// be empty until [`ClusterState::compact`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    dim: usize,
    deltas: Vec<Vec<f64>>,
    counts: Vec<usize>,
    labels: Vec<Option<usize>>,
}

impl ClusterState {
    pub fn new(dim: usize, samples: usize) -> Self {
        ClusterState { dim, deltas: Vec::new(), counts: Vec::new(), labels: vec![None; samples] }
    }

    /// State with given parameters and no assignments.
    pub fn from_deltas(deltas: Vec<Vec<f64>>, samples: usize) -> Result<Self> {
        let dim = deltas.first().map(Vec::len).unwrap_or(0);
        if let Some(d) = deltas.iter().find(|d| d.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: d.len() });
        }
        let k = deltas.len();
        Ok(ClusterState { dim, deltas, counts: vec![0; k], labels: vec![None; samples] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Clusters held, including empty ones.
    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// Clusters with at least one member.
    pub fn live(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn deltas(&self) -> &[Vec<f64>] {
        &self.deltas
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn set_counts(&mut self, counts: Vec<usize>) -> Result<()> {
        if counts.len() != self.deltas.len() {
            return Err(Error::Dimension { expected: self.deltas.len(), got: counts.len() });
        }
        self.counts = counts;
        Ok(())
    }

    fn check_label(&self, l: usize) -> Result<()> {
        if l >= self.deltas.len() {
            return Err(Error::Data(format!("label {l} does not index one of {} clusters", self.deltas.len())));
        }
        Ok(())
    }

    fn check_dim(&self, h: &[f64]) -> Result<()> {
        if h.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: h.len() });
        }
        Ok(())
    }

    /// Remove sample `k` from its cluster.
    pub fn unassign(&mut self, k: usize) {
        if let Some(l) = self.labels[k].take() {
            self.counts[l] -= 1;
        }
    }

    fn assign(&mut self, k: usize, l: usize) {
        self.unassign(k);
        self.labels[k] = Some(l);
        self.counts[l] += 1;
    }

    /// Whether the counts agree with the labels.
    pub fn is_consistent(&self) -> bool {
        let mut tally = vec![0usize; self.deltas.len()];
        for l in self.labels.iter().flatten() {
            match tally.get_mut(*l) {
                Some(t) => *t += 1,
                None => return false,
            }
        }
        tally == self.counts
    }

    /// Drop empty clusters and renumber labels in order of first
    /// appearance of the surviving clusters.
    pub fn compact(&mut self) {
        let mut map = vec![None; self.deltas.len()];
        let mut next = 0;
        for (j, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                map[j] = Some(next);
                next += 1;
            }
        }
        let deltas = std::mem::take(&mut self.deltas);
        self.deltas = deltas.into_iter().zip(&map).filter(|(_, m)| m.is_some()).map(|(d, _)| d).collect();
        self.counts.retain(|&c| c > 0);
        for l in self.labels.iter_mut().flatten() {
            *l = map[*l].expect("labelled cluster is non-empty");
        }
    }
}

/// Unnormalized CRP weights for the current clusters followed by the
/// new-cluster option. `k_index` is the running sample ordinal in the sweep.
/// Empty clusters get weight zero and `K` in the new-cluster weight counts
/// live clusters only.
pub fn crp_weights(state: &ClusterState, k_index: usize, cfg: &ClusterConfig) -> Vec<f64> {
    let denom = k_index as f64 + cfg.psi;
    let mut w: Vec<f64> = state
        .counts
        .iter()
        .map(|&n| if n == 0 { 0.0 } else { (n as f64 - cfg.alpha) / denom })
        .collect();
    w.push((cfg.psi + state.live() as f64 * cfg.alpha) / denom);
    w
}

/// `hᵀδ - λ‖δ‖²`.
pub fn log_correlation_likelihood(h: &[f64], delta: &[f64], lambda: f64) -> f64 {
    let dot: f64 = h.iter().zip(delta).map(|(a, b)| a * b).sum();
    let sq: f64 = delta.iter().map(|d| d * d).sum();
    dot - lambda * sq
}

/// `exp(hᵀδ - λ‖δ‖²)`.
pub fn correlation_likelihood(h: &[f64], delta: &[f64], lambda: f64) -> f64 {
    log_correlation_likelihood(h, delta, lambda).exp()
}

/// Normalized probabilities of each existing cluster and of the new-cluster
/// option whose parameters are `proposal`.
pub fn label_probabilities(
    h: &[f64],
    state: &ClusterState,
    k_index: usize,
    cfg: &ClusterConfig,
    proposal: &[f64],
) -> Vec<f64> {
    let prior = crp_weights(state, k_index, cfg);
    let logs: Vec<f64> = prior
        .iter()
        .enumerate()
        .map(|(j, &w)| {
            let delta = state.deltas.get(j).map(Vec::as_slice).unwrap_or(proposal);
            if w > 0.0 {
                w.ln() + log_correlation_likelihood(h, delta, cfg.lambda)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Parameters for a prospective new cluster: i.i.d. Student-t components
/// times `t_scale`.
pub fn draw_proposal(dim: usize, cfg: &ClusterConfig, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let t = StudentT::new(cfg.t_dof as f64).map_err(|e| Error::Config(format!("t distribution: {e}")))?;
    Ok((0..dim).map(|_| t.sample(rng) * cfg.t_scale).collect())
}

/// Draw a label for sample `sample` with feature `h`, given a proposal for
/// the new-cluster option. The sample must be unassigned. Returns the label,
/// which equals the previous cluster count when a cluster was opened.
pub fn sample_label_with(
    h: &[f64],
    sample: usize,
    state: &mut ClusterState,
    k_index: usize,
    cfg: &ClusterConfig,
    proposal: Vec<f64>,
    rng: &mut impl Rng,
) -> Result<usize> {
    state.check_dim(h)?;
    if proposal.len() != state.dim {
        return Err(Error::Dimension { expected: state.dim, got: proposal.len() });
    }
    let k = state.len();
    let label = if state.live() == 0 {
        k
    } else {
        let p = label_probabilities(h, state, k_index, cfg, &proposal);
        if p[..k].iter().all(|&v| v < cfg.new_cluster_threshold) {
            k
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            p.iter().position(|&v| {
                acc += v;
                u < acc
            })
            .unwrap_or_else(|| p.iter().rposition(|&v| v > 0.0).unwrap_or(k))
        }
    };
    if label == k {
        state.deltas.push(proposal);
        state.counts.push(0);
    }
    state.assign(sample, label);
    Ok(label)
}

/// [`sample_label_with`] with a freshly drawn proposal.
pub fn sample_label(
    h: &[f64],
    sample: usize,
    state: &mut ClusterState,
    k_index: usize,
    cfg: &ClusterConfig,
    rng: &mut impl Rng,
) -> Result<usize> {
    let proposal = draw_proposal(state.dim, cfg, rng)?;
    sample_label_with(h, sample, state, k_index, cfg, proposal, rng)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `argmax_j hᵀδ_j`, lowest index on ties.
pub fn predict_label(h: &[f64], state: &ClusterState) -> Result<usize> {
    if state.is_empty() {
        return Err(Error::Data("no clusters to predict from".into()));
    }
    state.check_dim(h)?;
    let mut best = (0, dot(h, &state.deltas[0]));
    for (j, d) in state.deltas.iter().enumerate().skip(1) {
        let s = dot(h, d);
        if s > best.1 {
            best = (j, s);
        }
    }
    Ok(best.0)
}

/// `hᵀδ_true - hᵀδ_predicted`.
pub fn margin(state: &ClusterState, h: &[f64], l_true: usize) -> Result<f64> {
    state.check_label(l_true)?;
    let pred = predict_label(h, state)?;
    Ok(dot(h, &state.deltas[l_true]) - dot(h, &state.deltas[pred]))
}

pub fn hinge_loss(state: &ClusterState, h: &[f64], l_true: usize) -> Result<f64> {
    let m = margin(state, h, l_true)?;
    Ok(if m >= 1.0 { 0.0 } else { 1.0 - m })
}

/// Passive-aggressive correction. With `τ = min(C, loss/‖h‖²)`, moves
/// `δ_true` by `+τh` and the predicted cluster's `δ` by `-τh`. When the
/// prediction is already correct both moves land on one vector and cancel,
/// so nothing changes. Returns the applied `τ`.
pub fn pa_update(state: &mut ClusterState, h: &[f64], l_true: usize, c: f64) -> Result<f64> {
    let loss = hinge_loss(state, h, l_true)?;
    let pred = predict_label(h, state)?;
    if loss == 0.0 || pred == l_true {
        return Ok(0.0);
    }
    let norm2 = dot(h, h);
    if norm2 == 0.0 {
        log::warn!("skipping passive-aggressive update for a zero feature vector");
        return Ok(0.0);
    }
    let tau = c.min(loss / norm2);
    if tau <= 0.0 {
        return Ok(0.0);
    }
    for (d, x) in state.deltas[l_true].iter_mut().zip(h) {
        *d += tau * x;
    }
    for (d, x) in state.deltas[pred].iter_mut().zip(h) {
        *d -= tau * x;
    }
    Ok(tau)
}

/// Cluster centers (member means) and sizes handed to the fuzzy model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub centers: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl ClusterSummary {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Member means for every cluster with at least one label in `labels`.
    pub fn from_labels(features: &Rows, labels: &[usize]) -> Result<Self> {
        if labels.len() != features.len() {
            return Err(Error::Dimension { expected: features.len(), got: labels.len() });
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let m = features.width();
        let mut centers = vec![vec![0.0; m]; k];
        let mut counts = vec![0usize; k];
        for (h, &l) in features.iter().zip(labels) {
            counts[l] += 1;
            centers[l].iter_mut().zip(h).for_each(|(c, v)| *c += v);
        }
        if counts.contains(&0) {
            return Err(Error::Data("cluster labels are not contiguous".into()));
        }
        for (c, &n) in centers.iter_mut().zip(&counts) {
            c.iter_mut().for_each(|v| *v /= n as f64);
        }
        Ok(ClusterSummary { centers, counts })
    }
}

/// Per-sweep diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub live_clusters: usize,
    /// Fraction of samples whose label changed during the sweep.
    pub changed: f64,
}

#[derive(Debug, Clone)]
pub struct ClusterFit {
    pub state: ClusterState,
    pub summary: ClusterSummary,
    pub sweeps: Vec<SweepStats>,
}

impl ClusterFit {
    pub fn labels(&self) -> Vec<usize> {
        self.state.labels.iter().map(|l| l.expect("every sample is labelled")).collect()
    }
}

/// One Gibbs pass over the rows of `features` in order: each sample is
/// unassigned, relabelled by [`sample_label`], then followed by a
/// passive-aggressive update towards the drawn label.
pub fn sweep(features: &Rows, state: &mut ClusterState, cfg: &ClusterConfig, rng: &mut impl Rng) -> Result<SweepStats> {
    if features.len() != state.labels.len() {
        return Err(Error::Dimension { expected: state.labels.len(), got: features.len() });
    }
    let mut changed = 0;
    for (k, h) in features.iter().enumerate() {
        let before = state.labels[k];
        state.unassign(k);
        let label = sample_label(h, k, state, k + 1, cfg, rng)?;
        pa_update(state, h, label, cfg.c)?;
        if before != Some(label) {
            changed += 1;
        }
    }
    if state.deltas.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("cluster parameters became non-finite".into()));
    }
    Ok(SweepStats { live_clusters: state.live(), changed: changed as f64 / features.len().max(1) as f64 })
}

/// Run `cfg.sweeps` passes of [`sweep`] from an empty state seeded by
/// `cfg.seed`. Empty clusters are removed after the final pass.
pub fn fit(features: &Rows, cfg: &ClusterConfig) -> Result<ClusterFit> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(Error::Data("cannot cluster an empty feature set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ClusterState::new(features.width(), features.len());
    let mut sweeps = Vec::with_capacity(cfg.sweeps);
    for i in 0..cfg.sweeps {
        let stats = sweep(features, &mut state, cfg, &mut rng)?;
        debug_assert!(state.is_consistent());
        log::debug!("sweep {}: {} live clusters, {:.3} relabelled", i + 1, stats.live_clusters, stats.changed);
        sweeps.push(stats);
    }
    state.compact();
    let labels: Vec<usize> = state.labels.iter().map(|l| l.expect("every sample is labelled")).collect();
    let summary = ClusterSummary::from_labels(features, &labels)?;
    Ok(ClusterFit { state, summary, sweeps })
}
