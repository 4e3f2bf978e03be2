//! Simulated plants for tests and for running the Wiener-Hammerstein bench
//! without the measured data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::TimeSeries;
use crate::Result;

/// Direct-form IIR filter `a(q) y = b(q) x` with `a[0] = 1`.
#[derive(Debug, Clone)]
struct Iir {
    b: Vec<f64>,
    a: Vec<f64>,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Iir {
    fn new(b: &[f64], a: &[f64]) -> Self {
        Iir { b: b.to_vec(), a: a.to_vec(), xs: vec![0.0; b.len()], ys: vec![0.0; a.len()] }
    }

    /// Numerator `b_shape` rescaled so the DC gain is one.
    fn with_unit_dc(b_shape: &[f64], a: &[f64]) -> Self {
        let gain = a.iter().sum::<f64>() / b_shape.iter().sum::<f64>();
        let b: Vec<f64> = b_shape.iter().map(|v| v * gain).collect();
        Iir::new(&b, a)
    }

    fn step(&mut self, x: f64) -> f64 {
        self.xs.rotate_right(1);
        self.xs[0] = x;
        let mut y: f64 = self.b.iter().zip(&self.xs).map(|(b, x)| b * x).sum();
        y -= self.a[1..].iter().zip(&self.ys).map(|(a, y)| a * y).sum::<f64>();
        self.ys.rotate_right(1);
        self.ys[0] = y;
        y
    }
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// `1 - 2r cos θ q⁻¹ + r² q⁻²`.
fn pair(r: f64, theta: f64) -> Vec<f64> {
    vec![1.0, -2.0 * r * theta.cos(), r * r]
}

/// Asymmetric saturation standing in for the diode-resistor stage.
fn static_nonlinearity(v: f64) -> f64 {
    if v >= 0.0 {
        v / (1.0 + 1.5 * v)
    } else {
        v
    }
}

/// Wiener-Hammerstein surrogate: band-limited Gaussian excitation through a
/// third-order low-pass, a saturating static map and a second-order filter,
/// plus small output noise. Deterministic given `seed`.
pub fn wiener_hammerstein(len: usize, seed: u64) -> Result<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, 0.002).expect("noise normal");
    let mut shaping = Iir::with_unit_dc(&[1.0], &[1.0, -0.6]);
    let mut g1 = Iir::with_unit_dc(&[1.0, 1.0], &poly_mul(&[1.0, -0.5], &pair(0.8, 0.5)));
    let mut g2 = Iir::with_unit_dc(&[1.0, 0.5], &pair(0.7, 0.9));
    let (mut u, mut y) = (Vec::with_capacity(len), Vec::with_capacity(len));
    for _ in 0..len {
        let uk = 0.5 * shaping.step(white.sample(&mut rng));
        let yk = g2.step(static_nonlinearity(g1.step(uk))) + noise.sample(&mut rng);
        u.push(uk);
        y.push(yk);
    }
    TimeSeries::new(u, y)
}

/// `y(k) = a y(k-1) + u(k) + e(k)` driven by uniform input on `[-1, 1]`
/// and Gaussian noise of standard deviation `noise`.
pub fn first_order_linear(len: usize, a: f64, noise: f64, seed: u64) -> Result<TimeSeries> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = Normal::new(0.0, noise.max(0.0)).expect("noise normal");
    let (mut u, mut y) = (Vec::with_capacity(len), Vec::with_capacity(len));
    let mut prev = 0.0;
    for _ in 0..len {
        let uk: f64 = rng.random_range(-1.0..1.0);
        let yk = a * prev + uk + e.sample(&mut rng);
        u.push(uk);
        y.push(yk);
        prev = yk;
    }
    TimeSeries::new(u, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filters_have_unit_dc_gain() {
        let mut f = Iir::with_unit_dc(&[1.0, 1.0], &poly_mul(&[1.0, -0.5], &pair(0.8, 0.5)));
        let mut last = 0.0;
        for _ in 0..2000 {
            last = f.step(1.0);
        }
        assert!((last - 1.0).abs() < 1e-9);
    }

    #[test]
    fn surrogate_is_deterministic_and_bounded() {
        let a = wiener_hammerstein(5000, 3).unwrap();
        let b = wiener_hammerstein(5000, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.y().iter().all(|v| v.abs() < 10.0));
    }

    #[test]
    fn linear_plant_recursion() {
        let s = first_order_linear(50, 0.5, 0.0, 1).unwrap();
        for k in 1..50 {
            assert!((s.y()[k] - 0.5 * s.y()[k - 1] - s.u()[k]).abs() < 1e-15);
        }
    }
}
