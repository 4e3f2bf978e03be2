//! Truncated-exponential conditional of a continuous visible unit on `[0, 1]`.
//!
//! With activation `a`, the density is `a e^{a x} / (e^a - 1)`. Every
//! function switches to the uniform limit when `|a| < EPS`.

/// Below this activation magnitude the unit is treated as uniform.
pub const EPS: f64 = 1e-8;

/// Density at `x`.
pub fn density(a: f64, x: f64) -> f64 {
    if a.abs() < EPS {
        1.0
    } else if a > 0.0 {
        a * (a * (x - 1.0)).exp() / -(-a).exp_m1()
    } else {
        a * (a * x).exp() / a.exp_m1()
    }
}

/// Cumulative distribution at `x`.
pub fn cdf(a: f64, x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    if a.abs() < EPS {
        x
    } else if a > 0.0 {
        (a * (x - 1.0)).exp() * (-a * x).exp_m1() / (-a).exp_m1()
    } else {
        (a * x).exp_m1() / a.exp_m1()
    }
}

/// Mean of the distribution.
pub fn expected(a: f64) -> f64 {
    if a.abs() < EPS {
        0.5
    } else if a.abs() < 1e-3 {
        // The closed form cancels catastrophically near zero.
        0.5 + a / 12.0 - a.powi(3) / 720.0
    } else {
        1.0 / -(-a).exp_m1() - 1.0 / a
    }
}

/// Inverse-CDF transform of a uniform draw `u` in `[0, 1]`.
pub fn inverse_cdf(a: f64, u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    // Each branch keeps the logarithm's argument away from cancellation:
    // the mass sits near x = 1 for a > 0 and near x = 0 for a < 0.
    let x = if a.abs() < EPS {
        u
    } else if a > 0.0 {
        if u > 0.5 {
            1.0 + (-(1.0 - u) * -(-a).exp_m1()).ln_1p() / a
        } else if a < 700.0 {
            (u * a.exp_m1()).ln_1p() / a
        } else {
            1.0 + (u + (1.0 - u) * (-a).exp()).ln() / a
        }
    } else if u < 0.5 {
        (u * a.exp_m1()).ln_1p() / a
    } else {
        ((1.0 - u) + u * a.exp()).ln() / a
    };
    x.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_limit() {
        assert_eq!(density(0.0, 0.3), 1.0);
        assert_eq!(cdf(0.0, 0.25), 0.25);
        assert_eq!(expected(0.0), 0.5);
        assert_eq!(inverse_cdf(0.0, 0.7), 0.7);
    }

    #[test]
    fn density_at_two() {
        let e2 = 2f64.exp();
        assert!((density(2.0, 1.0) - 2.0 * e2 / (e2 - 1.0)).abs() < 1e-12);
        assert!((density(2.0, 1.0) - 2.313).abs() < 1e-3);
    }

    #[test]
    fn expected_at_two() {
        let direct = 1.0 / (1.0 - (-2f64).exp()) - 0.5;
        assert!((expected(2.0) - direct).abs() < 1e-14);
        assert!((expected(2.0) - 0.6565).abs() < 1e-4);
    }

    #[test]
    fn cdf_endpoints() {
        for a in [-700.0, -30.0, -1.0, -1e-9, 0.0, 1e-6, 0.5, 3.0, 40.0, 700.0] {
            assert!(cdf(a, 0.0).abs() < 1e-15, "a={a}");
            assert!((cdf(a, 1.0) - 1.0).abs() < 1e-15, "a={a}");
            assert_eq!(inverse_cdf(a, 0.0), 0.0);
            assert!((inverse_cdf(a, 1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extreme_activations_stay_finite() {
        for a in [-1e4, -700.0, 700.0, 1e4] {
            for x in [0.0, 0.5, 1.0] {
                assert!(density(a, x).is_finite());
            }
            let e = expected(a);
            assert!(e > 0.0 && e < 1.0);
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        for a in [1e-3, -1e-3] {
            let lo = expected(a * (1.0 - 1e-9));
            let hi = expected(a * (1.0 + 1e-9));
            assert!((lo - hi).abs() < 1e-11);
        }
    }
}
