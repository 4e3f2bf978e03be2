use dfm::probcluster::{
    self, correlation_likelihood, crp_weights, hinge_loss, margin, pa_update, predict_label, sample_label,
    sample_label_with, ClusterConfig, ClusterState,
};
use dfm::Rows;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn state(deltas: Vec<Vec<f64>>, counts: Vec<usize>) -> ClusterState {
    let mut s = ClusterState::from_deltas(deltas, 1).unwrap();
    s.set_counts(counts).unwrap();
    s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn crp_weights_hand_example() {
    let cfg = ClusterConfig { alpha: 0.8, psi: 10.0, ..ClusterConfig::default() };
    let s = state(vec![vec![0.0], vec![0.0]], vec![5, 14]);
    let w = crp_weights(&s, 20, &cfg);
    assert!((w[0] - 0.14).abs() < 1e-12);
    assert!((w[1] - 13.2 / 30.0).abs() < 1e-12);
    assert!((w[2] - 0.386_666_666_666_666_7).abs() < 1e-12);
}

#[test]
fn correlation_likelihood_examples() {
    assert_eq!(correlation_likelihood(&[0.4, 0.7], &[0.0, 0.0], 5.0), 1.0);
    assert_eq!(correlation_likelihood(&[0.0, 1.0], &[3.0, 0.0], 0.0), 1.0);
    assert!((correlation_likelihood(&[1.0, 0.0], &[1.0, 0.0], 5.0) - 0.018_315_638_888_734_18).abs() < 1e-15);
}

#[test]
fn first_sample_always_opens_a_cluster() {
    for seed in 0..20 {
        let mut s = ClusterState::new(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = sample_label(&[0.2, 0.5, 0.9], 2, &mut s, 1, &ClusterConfig::default(), &mut rng).unwrap();
        assert_eq!(l, 0);
        assert_eq!(s.counts(), &[1]);
        assert_eq!(s.labels()[2], Some(0));
    }
}

/// Empirical label frequencies from repeated draws on clones of `base`,
/// each with the same fixed proposal.
fn frequencies(base: &ClusterState, h: &[f64], cfg: &ClusterConfig, proposal: &[f64], draws: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut hits = vec![0usize; base.len() + 1];
    for _ in 0..draws {
        let mut s = base.clone();
        let l = sample_label_with(h, 0, &mut s, 10, cfg, proposal.to_vec(), &mut rng).unwrap();
        hits[l] += 1;
    }
    hits.iter().map(|&c| c as f64 / draws as f64).collect()
}

#[test]
fn strongly_correlated_cluster_wins() {
    let cfg = ClusterConfig { alpha: 0.5, psi: 0.01, lambda: 0.0, ..ClusterConfig::default() };
    let mut base = ClusterState::from_deltas(vec![vec![4.0, 4.0]], 1).unwrap();
    base.set_counts(vec![20]).unwrap();
    let f = frequencies(&base, &[1.0, 1.0], &cfg, &[0.0, 0.0], 1000);
    assert!(f[0] > 0.95, "existing cluster chosen with frequency {}", f[0]);
}

#[test]
fn heavy_penalty_reduces_draw_to_prior() {
    // Equal-norm parameters and a zero feature make every likelihood the
    // same, so only the seating prior separates the options.
    let cfg = ClusterConfig { alpha: 0.3, psi: 2.0, lambda: 1e3, ..ClusterConfig::default() };
    let d = 0.05;
    let base = state(vec![vec![d, 0.0], vec![0.0, d], vec![-d, 0.0]], vec![3, 6, 1]);
    let prior = crp_weights(&base, 10, &cfg);
    let total: f64 = prior.iter().sum();
    let draws = 20_000;
    let f = frequencies(&base, &[0.0, 0.0], &cfg, &[0.0, -d], draws);
    for (j, (freq, w)) in f.iter().zip(&prior).enumerate() {
        let p = w / total;
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((freq - p).abs() < 5.0 * sd, "option {j}: frequency {freq} vs prior {p}");
    }
}

#[test]
fn label_draws_match_analytic_probabilities() {
    let cfg = ClusterConfig { alpha: 0.5, psi: 1.0, lambda: 0.5, ..ClusterConfig::default() };
    let base = state(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![4, 4]);
    let h = [0.8, 0.3];
    let proposal = [0.2, 0.2];
    let prior = crp_weights(&base, 10, &cfg);
    let deltas: Vec<&[f64]> = vec![&[1.0, 0.0], &[0.0, 1.0], &proposal];
    let raw: Vec<f64> = prior.iter().zip(&deltas).map(|(w, d)| w * correlation_likelihood(&h, d, cfg.lambda)).collect();
    let total: f64 = raw.iter().sum();
    let draws = 20_000;
    let f = frequencies(&base, &h, &cfg, &proposal, draws);
    for (freq, r) in f.iter().zip(&raw) {
        let p = r / total;
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((freq - p).abs() < 5.0 * sd, "frequency {freq} vs {p}");
    }
}

#[test]
fn threshold_forces_a_new_cluster() {
    let cfg = ClusterConfig { new_cluster_threshold: 0.5, lambda: 0.0, ..ClusterConfig::default() };
    let base = state(vec![vec![-5.0, 0.0]], vec![3]);
    let f = frequencies(&base, &[1.0, 0.0], &cfg, &[0.0, 0.0], 200);
    assert_eq!(f[1], 1.0);
}

#[test]
fn prediction_margin_and_hinge_examples() {
    let s = state(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1, 1]);
    assert_eq!(predict_label(&[0.9, 0.1], &s).unwrap(), 0);
    assert_eq!(margin(&s, &[0.0, 1.0], 0).unwrap(), -1.0);
    assert_eq!(hinge_loss(&s, &[0.0, 1.0], 0).unwrap(), 2.0);
    assert_eq!(margin(&s, &[0.0, 1.0], 1).unwrap(), 0.0);
    assert_eq!(hinge_loss(&s, &[0.0, 1.0], 1).unwrap(), 1.0);
    let single = state(vec![vec![0.3]], vec![1]);
    assert_eq!(predict_label(&[-2.0], &single).unwrap(), 0);
    let tied = state(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![1, 1]);
    assert_eq!(predict_label(&[0.5, 0.5], &tied).unwrap(), 0);
}

#[test]
fn hinge_at_negative_unit_margin() {
    let s = state(vec![vec![2.0], vec![1.0]], vec![1, 1]);
    assert_eq!(margin(&s, &[1.0], 1).unwrap(), -1.0);
    assert_eq!(hinge_loss(&s, &[1.0], 1).unwrap(), 2.0);
}

#[test]
pub fn passive_aggressive_hand_trace() {
    let mut s = state(vec![vec![0.0, 0.0], vec![0.0, 1.0]], vec![1, 1]);
    let h = [0.0, 1.0];
    assert_eq!(predict_label(&h, &s).unwrap(), 1);
    assert_eq!(hinge_loss(&s, &h, 0).unwrap(), 2.0);
    let tau = pa_update(&mut s, &h, 0, 10.0).unwrap();
    assert_eq!(tau, 2.0);
    assert_eq!(s.deltas(), &[vec![0.0, 2.0], vec![0.0, -1.0]]);
    assert_eq!(predict_label(&h, &s).unwrap(), 0);
}

#[test]
fn passive_cases_leave_state_unchanged() {
    let mut s = state(vec![vec![3.0, 0.0], vec![0.0, 0.5]], vec![1, 1]);
    let before = s.clone();
    // Correct prediction, then a zero feature vector.
    assert_eq!(pa_update(&mut s, &[1.0, 0.0], 0, 1.0).unwrap(), 0.0);
    assert_eq!(s, before);
    assert_eq!(pa_update(&mut s, &[0.0, 0.0], 1, 1.0).unwrap(), 0.0);
    assert_eq!(s, before);
}

fn blobs(n_per: usize, seed: u64) -> (Rows, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.03).unwrap();
    let centers: [[f64; 2]; 2] = [[0.7, -0.7], [-0.7, 0.7]];
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for i in 0..2 * n_per {
        let c = i % 2;
        rows.push(centers[c].iter().map(|v| v + noise.sample(&mut rng)).collect::<Vec<f64>>());
        truth.push(c);
    }
    (Rows::from_rows(&rows).unwrap(), truth)
}

/// Fraction of samples sharing the majority true label of their cluster.
fn purity(labels: &[usize], truth: &[usize]) -> f64 {
    let k = labels.iter().max().unwrap() + 1;
    let mut table = vec![[0usize; 2]; k];
    for (&l, &t) in labels.iter().zip(truth) {
        table[l][t] += 1;
    }
    table.iter().map(|r| r[0].max(r[1])).sum::<usize>() as f64 / labels.len() as f64
}

/// Settings for the blob oracle: a weak seating prior, a light parameter
/// penalty and broad proposals.
fn blob_config(seed: u64) -> ClusterConfig {
    ClusterConfig { alpha: 0.1, psi: 0.5, lambda: 0.05, c: 0.01, sweeps: 20, t_scale: 1.0, seed, ..ClusterConfig::default() }
}

#[test]
pub fn two_blobs_are_separated() {
    let mut good = 0;
    for seed in 0..5 {
        let (rows, truth) = blobs(100, 100 + seed);
        let fit = probcluster::fit(&rows, &blob_config(seed)).unwrap();
        let labels = fit.labels();
        let p = purity(&labels, &truth);
        let mut sizes = fit.summary.counts.clone();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let top_two = (sizes[0] + sizes.get(1).copied().unwrap_or(0)) as f64 / rows.len() as f64;
        println!("seed {seed}: K={} sizes={sizes:?} purity={p:.3}", fit.summary.k());
        if p >= 0.95 && top_two >= 0.95 {
            good += 1;
        }
    }
    assert!(good >= 4, "only {good} of 5 seeds separated the blobs");
}

#[test]
pub fn counts_match_labels_after_every_sweep() {
    let (rows, _) = blobs(60, 7);
    let cfg = ClusterConfig { sweeps: 4, seed: 3, ..ClusterConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = ClusterState::new(rows.width(), rows.len());
    for _ in 0..cfg.sweeps {
        let stats = probcluster::sweep(&rows, &mut s, &cfg, &mut rng).unwrap();
        assert!(s.is_consistent());
        assert_eq!(s.counts().iter().sum::<usize>(), rows.len());
        assert!(s.labels().iter().all(|l| l.is_some_and(|l| s.counts()[l] > 0)));
        assert_eq!(stats.live_clusters, s.live());
    }
    s.compact();
    let fit = probcluster::fit(&rows, &cfg).unwrap();
    assert_eq!(fit.state, s);
    assert!(fit.summary.counts.iter().all(|&c| c > 0));
    assert_eq!(fit.summary.counts.iter().sum::<usize>(), rows.len());
}

#[test]
fn centers_are_member_means() {
    let (rows, _) = blobs(30, 5);
    let fit = probcluster::fit(&rows, &ClusterConfig { seed: 8, ..ClusterConfig::default() }).unwrap();
    let labels = fit.labels();
    for (j, c) in fit.summary.centers.iter().enumerate() {
        let members: Vec<&[f64]> = rows.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(r, _)| r).collect();
        assert_eq!(members.len(), fit.summary.counts[j]);
        for d in 0..rows.width() {
            let mean = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
            assert!((mean - c[d]).abs() < 1e-12);
        }
    }
}

#[test]
fn single_sample_gives_single_cluster() {
    let rows = Rows::from_rows(&[[0.25, 0.75, 0.5]]).unwrap();
    let fit = probcluster::fit(&rows, &ClusterConfig::default()).unwrap();
    assert_eq!(fit.summary.k(), 1);
    assert_eq!(fit.summary.centers[0], vec![0.25, 0.75, 0.5]);
}

#[test]
fn fit_is_reproducible() {
    let (rows, _) = blobs(80, 9);
    let cfg = ClusterConfig { seed: 42, ..ClusterConfig::default() };
    let a = probcluster::fit(&rows, &cfg).unwrap();
    let b = probcluster::fit(&rows, &cfg).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.summary, b.summary);
}

fn vec_in(dim: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, dim)
}

fn cluster_state(dim: usize) -> impl Strategy<Value = ClusterState> {
    (prop::collection::vec(vec_in(dim, -3.0, 3.0), 1..6), prop::collection::vec(1usize..20, 6)).prop_map(
        |(deltas, counts)| {
            let k = deltas.len();
            state(deltas, counts[..k].to_vec())
        },
    )
}

proptest! {
    #[test]
    fn crp_weights_are_valid(s in cluster_state(2), k_index in 1usize..500, alpha in 0.01f64..0.99, psi in 0.01f64..100.0) {
        let cfg = ClusterConfig { alpha, psi, ..ClusterConfig::default() };
        let w = crp_weights(&s, k_index, &cfg);
        prop_assert_eq!(w.len(), s.len() + 1);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        prop_assert!(*w.last().unwrap() > 0.0);
    }

    #[test]
    fn prediction_ignores_positive_scale(s in cluster_state(3), h in vec_in(3, -1.0, 1.0), scale in 1e-3f64..1e3) {
        let scaled: Vec<f64> = h.iter().map(|v| v * scale).collect();
        let a = predict_label(&h, &s).unwrap();
        let b = predict_label(&scaled, &s).unwrap();
        // Near-ties can flip under rounding; compare scores rather than indices.
        let sa = dot(&h, &s.deltas()[a]);
        let sb = dot(&h, &s.deltas()[b]);
        prop_assert!((sa - sb).abs() <= 1e-12 * (1.0 + sa.abs()));
    }

    #[test]
    fn margin_ignores_components_orthogonal_to_h(s in cluster_state(2), x in -1.0f64..1.0, shift in -5.0f64..5.0) {
        let h = [x, 0.0];
        let moved: Vec<Vec<f64>> = s.deltas().iter().map(|d| vec![d[0], d[1] + shift]).collect();
        let t = state(moved, s.counts().to_vec());
        for l in 0..s.len() {
            let a = margin(&s, &h, l).unwrap();
            let b = margin(&t, &h, l).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn passive_aggressive_step_improves_margin(
        s in cluster_state(3),
        h in vec_in(3, -1.0, 1.0),
        pick in 0usize..6,
        c in 1e-4f64..10.0,
    ) {
        prop_assume!(dot(&h, &h) > 1e-6);
        let l_true = pick % s.len();
        let pred = predict_label(&h, &s).unwrap();
        let before_margin = dot(&h, &s.deltas()[l_true]) - dot(&h, &s.deltas()[pred]);
        let mut t = s.clone();
        let tau = pa_update(&mut t, &h, l_true, c).unwrap();
        let changed: Vec<usize> = (0..s.len()).filter(|&j| s.deltas()[j] != t.deltas()[j]).collect();
        prop_assert!(changed.len() <= 2);
        prop_assert!(changed.iter().all(|&j| j == l_true || j == pred));
        if hinge_loss(&s, &h, l_true).unwrap() == 0.0 {
            prop_assert_eq!(&s, &t);
        }
        if tau > 0.0 {
            // Same pair of clusters, evaluated after the step.
            let after_margin = dot(&h, &t.deltas()[l_true]) - dot(&h, &t.deltas()[pred]);
            prop_assert!(after_margin >= before_margin);
            prop_assert!(tau <= c);
        }
    }
}
