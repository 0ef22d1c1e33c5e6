//! Small dense linear-algebra helpers over `nalgebra`.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, SVD};

use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Euclidean norm; absolute value in one dimension.
pub fn norm(x: &[f64]) -> f64 {
    match x {
        [v] => libm::fabs(*v),
        _ => libm::sqrt(x.iter().map(|v| v * v).sum()),
    }
}

/// Metric induced by [`norm`].
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    match (a, b) {
        ([x], [y]) => libm::fabs(x - y),
        _ => libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()),
    }
}

/// `out = m * x`.
pub fn mat_vec(m: &Matrix, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.ncols(), x.len());
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..x.len()).map(|j| m[(i, j)] * x[j]).sum();
    }
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("matrix has non-finite entries: {m:?}")));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical(format!("SVD did not converge for {m:?}")))?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Operator norm induced by the Euclidean norm (largest singular value).
pub fn operator_norm(m: &Matrix) -> Result<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        let v = m[(0, 0)];
        return if v.is_finite() {
            Ok(libm::fabs(v))
        } else {
            Err(Error::Numerical(format!("non-finite 1x1 matrix {v}")))
        };
    }
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Solves `a * x = b` by LU with partial pivoting.
pub fn solve(a: Matrix, b: &Matrix) -> Result<Matrix> {
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}
