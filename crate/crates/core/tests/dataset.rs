use std::io::Write;

use dfm::bench::{delays, PipelineConfig};
use dfm::dataset::{
    self, build_regressors, denormalize, gas_furnace, normalize, prepare, synth, DelaySpace, NormScope,
    RegressorConfig, TimeSeries,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn series(u: &[f64], y: &[f64]) -> TimeSeries {
    TimeSeries::new(u.to_vec(), y.to_vec()).unwrap()
}

#[test]
fn gas_furnace_shape() {
    let ts = gas_furnace();
    assert_eq!(ts.len(), 296);
    let reg = build_regressors(&ts, RegressorConfig::new(4, 5)).unwrap();
    assert_eq!(reg.x.width(), 10);
    assert_eq!(reg.len(), 291);
    let p = prepare(&ts, RegressorConfig::new(4, 5), 200, NormScope::Train).unwrap();
    assert_eq!((p.train.len(), p.test.len()), (200, 91));
    assert_eq!((p.raw_pairs, p.regressor_rows), (296, 291));
}

#[test]
fn gas_furnace_output_channel_spans_unit_interval() {
    let ts = gas_furnace();
    let ds = normalize(&build_regressors(&ts, RegressorConfig::new(4, 5)).unwrap()).unwrap();
    // Direct scan of the raw CO2 column over the rows that appear in the regressors.
    let raw = ts.y();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!((ds.norm().y_min, ds.norm().y_max), (lo, hi));
    let ys: Vec<f64> = ds.y().iter().copied().chain(ds.x().iter().flat_map(|r| r[..4].to_vec())).collect();
    assert_eq!(ys.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(ys.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
}

#[test]
fn hand_unrolled_regressors() {
    let reg = build_regressors(&series(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), RegressorConfig::new(1, 0)).unwrap();
    assert_eq!(reg.x.row(0), &[10.0, 2.0]);
    assert_eq!(reg.x.row(1), &[20.0, 3.0]);
    assert_eq!(reg.y, vec![20.0, 30.0]);

    let reg = build_regressors(&series(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), RegressorConfig::new(0, 0)).unwrap();
    assert_eq!(reg.x.as_slice(), &[1.0, 2.0, 3.0]);
    assert_eq!(reg.y, vec![10.0, 20.0, 30.0]);
}

#[test]
fn channel_map_example() {
    let reg = build_regressors(&series(&[0.0, 5.0, 10.0], &[1.0, 2.0, 4.0]), RegressorConfig::new(0, 0)).unwrap();
    let ds = normalize(&reg).unwrap();
    assert_eq!(ds.x().as_slice(), &[0.0, 0.5, 1.0]);
    assert_eq!(ds.y(), &[0.0, 1.0 / 3.0, 1.0]);
}

#[test]
fn csv_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("three.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "t,u,y\n0,0.5,1\n1,-0.25,2.5\n2,1e-3,3").unwrap();
    drop(f);
    let ts = dataset::load_csv(&path, "u", "y").unwrap();
    assert_eq!(ts.u(), &[0.5, -0.25, 1e-3]);
    assert_eq!(ts.y(), &[1.0, 2.5, 3.0]);
    assert!(dataset::load_csv(&path, "uBenchMark", "y").is_err());
    assert!(dataset::load_csv(dir.path().join("absent.csv"), "u", "y").is_err());
}

/// Ordinary least squares of `y` on `[x, 1]` with nalgebra; returns the
/// validation MSE on rows from `split` on.
fn linear_fit_mse(ts: &TimeSeries, cfg: RegressorConfig, split_index: usize) -> f64 {
    let reg = build_regressors(ts, cfg).unwrap();
    let n_train = split_index - cfg.lag();
    let design = |r: std::ops::Range<usize>| {
        DMatrix::from_fn(r.len(), cfg.width() + 1, |i, j| if j == cfg.width() { 1.0 } else { reg.x.row(r.start + i)[j] })
    };
    let a = design(0..n_train);
    let b = DVector::from_column_slice(&reg.y[..n_train]);
    let theta = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
    let v = design(n_train..reg.len());
    let resid = v * theta - DVector::from_column_slice(&reg.y[n_train..]);
    resid.norm_squared() / resid.len() as f64
}

#[test]
fn delay_search_on_a_first_order_linear_system() {
    let ts = synth::first_order_linear(400, 0.5, 0.01, 3).unwrap();
    let (small, big) = (RegressorConfig::new(1, 0), RegressorConfig::new(5, 5));
    let split = 300;
    // The true structure is (1, 0); a linear fit confirms it explains the data.
    let lin_small = linear_fit_mse(&ts, small, split);
    let lin_big = linear_fit_mse(&ts, big, split);
    assert!(lin_small < 2e-4 && lin_small <= lin_big * 1.2, "{lin_small} vs {lin_big}");

    let base = PipelineConfig::gas_furnace();
    let cfg = delays::search_config(&base);
    let m_small = delays::validation_mse(&ts, small, split, &cfg).unwrap();
    let m_big = delays::validation_mse(&ts, big, split, &cfg).unwrap();
    assert!(m_small <= m_big * 1.1, "(1,0): {m_small}, (5,5): {m_big}");

    let found = delays::search(&ts, &DelaySpace::Candidates(vec![small, big]), 6, split, 4, &base).unwrap();
    assert_eq!(found.trials.len(), 6);
    let best_seen = found.trials.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    assert_eq!(found.best_mse, best_seen);
    if found.trials.iter().any(|t| t.0 == small) && found.trials.iter().any(|t| t.0 == big) {
        assert!(found.best == small || (m_small - m_big).abs() <= 0.1 * m_big);
    }
}

#[test]
fn delay_search_on_gas_furnace_is_competitive_with_reference_order() {
    let ts = gas_furnace();
    let base = PipelineConfig::gas_furnace();
    let split = 205;
    let reference = delays::validation_mse(&ts, RegressorConfig::new(4, 5), split, &delays::search_config(&base)).unwrap();
    let found = delays::search(&ts, &DelaySpace::Range { lo: 1, hi: 10 }, 20, split, 7, &base).unwrap();
    assert!(found.best_mse <= 1.5 * reference, "best {:?} at {} vs (4,5) at {reference}", found.best, found.best_mse);
    let again = delays::search(&ts, &DelaySpace::Range { lo: 1, hi: 10 }, 20, split, 7, &base).unwrap();
    assert_eq!(found.trials, again.trials);
}

prop_compose! {
    fn arb_series()(len in 12usize..60)(
        u in prop::collection::vec(-5.0f64..5.0, len),
        y in prop::collection::vec(-5.0f64..5.0, len),
        n_y in 0usize..5,
        n_u in 0usize..5,
    ) -> (TimeSeries, RegressorConfig) {
        (TimeSeries::new(u, y).unwrap(), RegressorConfig::new(n_y, n_u))
    }
}

proptest! {
    #[test]
    fn rows_reproduce_the_series((ts, cfg) in arb_series()) {
        let reg = build_regressors(&ts, cfg).unwrap();
        prop_assert_eq!(reg.len(), ts.len() - cfg.lag());
        for (r, k) in (cfg.lag()..ts.len()).enumerate() {
            let row = reg.x.row(r);
            for d in 1..=cfg.n_y {
                prop_assert_eq!(row[d - 1], ts.y()[k - d]);
            }
            for d in 0..=cfg.n_u {
                prop_assert_eq!(row[cfg.n_y + d], ts.u()[k - d]);
            }
            prop_assert_eq!(reg.y[r], ts.y()[k]);
        }
    }

    #[test]
    fn normalized_entries_lie_in_unit_interval((ts, cfg) in arb_series(), frac in 0.2f64..0.8) {
        let n = ts.len() - cfg.lag();
        let n_train = ((n as f64 * frac) as usize).clamp(1, n - 1);
        for scope in [NormScope::Train, NormScope::All] {
            if let Ok(p) = prepare(&ts, cfg, n_train, scope) {
                prop_assert!(p.train.x().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!(p.train.y().iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!(p.test.x().as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
                if scope == NormScope::All {
                    prop_assert!(p.test.y().iter().all(|v| (0.0..=1.0).contains(v)));
                }
            }
        }
    }

    #[test]
    fn split_concatenation_is_the_source((ts, cfg) in arb_series(), frac in 0.0f64..1.0) {
        let ds = normalize(&build_regressors(&ts, cfg).unwrap()).unwrap();
        let n_train = ((ds.len() as f64 * frac) as usize).clamp(1, ds.len() - 1);
        let (a, b) = ds.split(n_train).unwrap();
        let joined: Vec<f64> = a.x().as_slice().iter().chain(b.x().as_slice()).copied().collect();
        prop_assert_eq!(joined.as_slice(), ds.x().as_slice());
        let ys: Vec<f64> = a.y().iter().chain(b.y()).copied().collect();
        prop_assert_eq!(ys.as_slice(), ds.y());
        prop_assert!(ds.split(0).is_err());
        prop_assert!(ds.split(ds.len()).is_err());
    }

    #[test]
    fn target_round_trip((ts, cfg) in arb_series()) {
        let reg = build_regressors(&ts, cfg).unwrap();
        let ds = normalize(&reg).unwrap();
        let back = denormalize(ds.y(), ds.norm());
        for (a, b) in back.iter().zip(&reg.y) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
