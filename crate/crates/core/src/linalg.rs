//! Thin wrappers over faer with sequential execution, so a given input always
//! produces the same bits regardless of how many sweep workers are running.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, MatRef, Par, Side};

use crate::error::{Error, NumericalFailure, Result};

/// `a * b`.
pub fn mul(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, 1.0, Par::Seq);
    out
}

/// `a^T * b`.
pub fn mul_tn(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    mul(a.transpose(), b)
}

/// `a * b^T`.
pub fn mul_nt(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Mat<f64> {
    mul(a, b.transpose())
}

pub fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max(a[(i, j)].abs());
        }
    }
    best
}

pub fn all_finite(a: MatRef<'_, f64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].is_finite()))
}

/// Solve `a x = b` for symmetric positive-definite `a` by Cholesky.
///
/// If the factorization fails, `1e-10 * trace / dim` is added to the diagonal
/// and the factorization retried once.
pub fn spd_solve(mut a: Mat<f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let dim = a.nrows();
    let trace: f64 = (0..dim).map(|i| a[(i, i)]).sum();
    let min_diag = (0..dim).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min);
    let failure = |jitter| {
        Error::Numerical(NumericalFailure::Solve {
            dim,
            trace,
            min_diag,
            jitter,
        })
    };
    if !trace.is_finite() {
        return Err(failure(0.0));
    }

    let mut jitter = 0.0;
    let llt = match a.llt(Side::Lower) {
        Ok(llt) => llt,
        Err(_) => {
            jitter = 1e-10 * trace / dim as f64;
            for i in 0..dim {
                a[(i, i)] += jitter;
            }
            a.llt(Side::Lower).map_err(|_| failure(jitter))?
        }
    };
    let x = llt.solve(b);
    if !all_finite(x.as_ref()) {
        return Err(failure(jitter));
    }
    Ok(x)
}
