//! Dense Cholesky factorization and triangular solves.

use crate::matrix::SquareMatrix;

/// Lower-triangular Cholesky factor of `a + shift * I`.
///
/// Returns `Err(pivot)` with the offending squared-pivot value when the
/// matrix (after the diagonal shift) is not numerically positive definite.
pub(crate) fn cholesky_lower(a: &SquareMatrix, shift: f64) -> Result<SquareMatrix, f64> {
    let n = a.size();
    let mut l = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j) + if i == j { shift } else { 0.0 };
            let (ri, rj) = (l.row(i), l.row(j));
            for k in 0..j {
                sum -= ri[k] * rj[k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(sum);
                }
                l.set(i, i, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub(crate) fn forward_solve(l: &SquareMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.size();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let row = l.row(i);
        let mut sum = b[i];
        for k in 0..i {
            sum -= row[k] * x[k];
        }
        x[i] = sum / row[i];
    }
    x
}
