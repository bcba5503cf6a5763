//! Small dense linear-algebra helpers used by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition estimate above which a weighted Gram matrix is rejected as
/// singular.
pub const SINGULARITY_CONDITION_LIMIT: f64 = 1e12;

/// Solve the symmetric system `A x = b`, rejecting ill-conditioned `A`.
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !cond.is_finite() || cond > SINGULARITY_CONDITION_LIMIT {
        return Err(Error::SingularDesign { cond });
    }
    svd.solve(b, 0.0).map_err(|_| Error::SingularDesign { cond })
}

/// Weighted Gram matrix `sum_i w_i x_i x_i^T` and moment vector
/// `sum_i w_i z_i x_i` over the given rows.
pub fn weighted_normal_system<'a, I>(rows: I, q: usize) -> (DMatrix<f64>, DVector<f64>)
where
    I: Iterator<Item = (f64, f64, &'a [f64])>,
{
    let mut gram = DMatrix::zeros(q, q);
    let mut moment = DVector::zeros(q);
    for (w, z, x) in rows {
        if w == 0.0 {
            continue;
        }
        for j in 0..q {
            moment[j] += w * z * x[j];
            for k in j..q {
                gram[(j, k)] += w * x[j] * x[k];
            }
        }
    }
    for j in 0..q {
        for k in 0..j {
            gram[(j, k)] = gram[(k, j)];
        }
    }
    (gram, moment)
}
