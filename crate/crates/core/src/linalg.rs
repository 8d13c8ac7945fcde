//! Dense least squares via Householder QR.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative threshold on |R_ii| below which a column is treated as dependent.
const RANK_TOL: f64 = 1e-10;

/// Minimizes `‖A·X − B‖_F` column by column. Fails when `A` has fewer rows
/// than columns or is numerically rank deficient.
pub fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = a.shape();
    if b.nrows() != m {
        return Err(Error::ShapeMismatch {
            expected: m,
            found: b.nrows(),
        });
    }
    if m < n {
        return Err(Error::RankDeficient(format!(
            "{m} observations for {n} unknowns"
        )));
    }

    let col_scale = (0..n)
        .map(|j| a.column(j).norm())
        .fold(0.0_f64, f64::max);
    let qr = a.clone().qr();
    let r = qr.r();
    for j in 0..n {
        if !(r[(j, j)].abs() > RANK_TOL * col_scale) {
            return Err(Error::RankDeficient(format!(
                "design column {j} is linearly dependent on the others"
            )));
        }
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::RankDeficient("singular triangular factor".into()))
}
