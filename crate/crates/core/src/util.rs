//! Small numeric helpers shared across modules.

use ndarray::Array2;

/// Sums a slice by recursive halving. Error grows like O(log n) in the
/// length instead of O(n), which keeps the big index sums of the
/// V-statistics well inside the equality tolerances used in tests.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    const UNROLL: usize = 32;
    if values.len() <= UNROLL {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Cholesky factor of a symmetric positive definite matrix, or `None`
/// when a pivot is not strictly positive. Left factor: `a = l * l^T`.
pub(crate) fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}
