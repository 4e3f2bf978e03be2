//! Consequent training by minimum-norm least squares.

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{JobSvd, SVDDC};

use crate::{Error, Result, Rows};

/// Singular values below `RCOND · σ_max` are treated as zero.
pub const RCOND: f64 = 1e-12;

/// Moore-Penrose pseudoinverse via SVD.
pub fn pinv(a: &Array2<f64>) -> Result<Array2<f64>> {
    pinv_rcond(a, RCOND)
}

pub fn pinv_rcond(a: &Array2<f64>, rcond: f64) -> Result<Array2<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("pseudoinverse of a matrix with non-finite entries".into()));
    }
    let (r, c) = a.dim();
    if r == 0 || c == 0 {
        return Ok(Array2::zeros((c, r)));
    }
    let (u, s, v_t) =
        a.svddc(JobSvd::Some).map_err(|e| Error::Numerical(format!("singular value decomposition: {e}")))?;
    let u = u.expect("left singular vectors requested");
    let v_t = v_t.expect("right singular vectors requested");
    let cutoff = rcond * s.iter().copied().fold(0.0, f64::max);
    let rank = s.iter().filter(|&&sv| sv > cutoff && sv > 0.0).count();
    if rank == 0 {
        return Ok(Array2::zeros((c, r)));
    }
    // Singular values come sorted in decreasing order.
    let inv = s.slice(s![..rank]).mapv(|sv| 1.0 / sv);
    let scaled = v_t.slice(s![..rank, ..]).t().to_owned() * &inv.insert_axis(Axis(0));
    Ok(scaled.dot(&u.slice(s![.., ..rank]).t()))
}

/// `W* = Y Ψ⁺` for a `K × N` design `Ψ` whose column `k` is the rule
/// vector of sample `k`.
pub fn solve_consequents(psi: &Array2<f64>, y: &[f64]) -> Result<Vec<f64>> {
    if psi.ncols() != y.len() {
        return Err(Error::Dimension { expected: psi.ncols(), got: y.len() });
    }
    let w = pinv(psi)?.t().dot(&Array1::from(y.to_vec()));
    Ok(w.to_vec())
}

/// `K × N` design matrix from `N` rows of width `K`.
pub fn design(rows: &Rows) -> Array2<f64> {
    Array2::from_shape_fn((rows.width(), rows.len()), |(j, k)| rows.row(k)[j])
}

/// Least-squares consequents from per-sample rule vectors.
pub fn solve_rows(rows: &Rows, y: &[f64]) -> Result<Vec<f64>> {
    solve_consequents(&design(rows), y)
}
