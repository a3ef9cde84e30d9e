//! Correlation-matrix factorizations, row-major at the interface.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cholesky factor, inverse and log-determinant of an SPD matrix.
#[derive(Debug, Clone)]
pub(crate) struct Factorization<T> {
    pub chol: Vec<T>,
    pub inv: Vec<T>,
    pub log_det: T,
}

pub(crate) fn factor<T: Scalar>(a: &[T], d: usize) -> Result<Factorization<T>> {
    let m = DMatrix::from_row_iterator(d, d, a.iter().map(|v| v.to_f64_lossy()));
    let c = m.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = c.l();
    let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let inv = c.inverse();
    let row_major = |m: &DMatrix<f64>| {
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(T::lit(m[(i, j)]));
            }
        }
        out
    };
    Ok(Factorization {
        chol: row_major(&l),
        inv: row_major(&inv),
        log_det: T::lit(log_det),
    })
}

/// y = L x for lower-triangular L.
pub(crate) fn lower_mul<T: Scalar>(l: &[T], d: usize, x: &[T], y: &mut [T]) {
    for i in 0..d {
        y[i] = (0..=i).map(|k| l[i * d + k] * x[k]).sum();
    }
}

/// xᵀ A x.
pub(crate) fn quad_form<T: Scalar>(a: &[T], d: usize, x: &[T]) -> T {
    (0..d)
        .map(|i| x[i] * (0..d).map(|j| a[i * d + j] * x[j]).sum::<T>())
        .sum()
}
