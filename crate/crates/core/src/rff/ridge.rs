use faer::{Mat, MatRef};

use super::{featurize, FeatureMap, Head, Model};
use crate::error::{Error, Result};
use crate::linalg;

/// Weights minimizing `(1/n) ||Phi W - Y||_F^2 + lambda ||W||_F^2`.
///
/// Solves `(Phi^T Phi / n + lambda I) W = Phi^T Y / n` directly when `m <= n`.
/// When `m > n` it solves the equivalent `n x n` system
/// `(Phi Phi^T / n + lambda I) A = Y / n` and returns `W = Phi^T A`, which
/// satisfies the same normal equations.
pub fn solve_ridge(phi: MatRef<'_, f64>, y: MatRef<'_, f64>, lambda: f64) -> Result<Mat<f64>> {
    let (n, m) = (phi.nrows(), phi.ncols());
    if n == 0 {
        return Err(Error::EmptyDataset("ridge fit"));
    }
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.nrows(),
        });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be a nonnegative number, got {lambda}"
        )));
    }
    let inv_n = 1.0 / n as f64;
    if m <= n {
        let mut a = linalg::mul_tn(phi, phi);
        let mut b = linalg::mul_tn(phi, y);
        for j in 0..m {
            for i in 0..m {
                a[(i, j)] *= inv_n;
            }
            a[(j, j)] += lambda;
        }
        for j in 0..b.ncols() {
            for i in 0..m {
                b[(i, j)] *= inv_n;
            }
        }
        linalg::spd_solve(a, b.as_ref())
    } else {
        let mut k = linalg::mul_nt(phi, phi);
        for j in 0..n {
            for i in 0..n {
                k[(i, j)] *= inv_n;
            }
            k[(j, j)] += lambda;
        }
        let rhs = Mat::from_fn(n, y.ncols(), |i, j| y[(i, j)] * inv_n);
        let dual = linalg::spd_solve(k, rhs.as_ref())?;
        Ok(linalg::mul_tn(phi, dual.as_ref()))
    }
}

/// `(max |(Phi^T Phi / n + lambda I) W - Phi^T Y / n|, max |Phi^T Y / n|)`.
pub fn normal_equation_residual(
    phi: MatRef<'_, f64>,
    y: MatRef<'_, f64>,
    w: MatRef<'_, f64>,
    lambda: f64,
) -> (f64, f64) {
    let inv_n = 1.0 / phi.nrows() as f64;
    let fitted = linalg::mul(phi, w);
    let lhs = linalg::mul_tn(phi, fitted.as_ref());
    let rhs = linalg::mul_tn(phi, y);
    let mut resid = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            let r = lhs[(i, j)] * inv_n + lambda * w[(i, j)] - rhs[(i, j)] * inv_n;
            resid = resid.max(r.abs());
            scale = scale.max((rhs[(i, j)] * inv_n).abs());
        }
    }
    (resid, scale)
}

fn head_for(y: MatRef<'_, f64>) -> Result<(Head, usize)> {
    match y.ncols() {
        0 => Err(Error::invalid("ridge targets need at least one column")),
        1 => Ok((Head::RidgeBinary, 2)),
        c => Ok((Head::RidgeMultioutput, c)),
    }
}

fn check_targets(y: MatRef<'_, f64>) -> Result<()> {
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            let v = y[(i, j)];
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!(
                    "target {v} at ({i}, {j}) is outside [0, 1]"
                )));
            }
        }
    }
    Ok(())
}

/// Fit a squared-loss model. One target column gives a binary head; `c`
/// columns give a `c`-class multi-output head.
pub fn fit_ridge(
    map: &FeatureMap,
    x: MatRef<'_, f64>,
    y: MatRef<'_, f64>,
    lambda: f64,
) -> Result<Model> {
    let phi = featurize(map, x)?;
    fit_ridge_features(map, phi.as_ref(), y, lambda)
}

/// [`fit_ridge`] on features already computed with `map`.
pub fn fit_ridge_features(
    map: &FeatureMap,
    phi: MatRef<'_, f64>,
    y: MatRef<'_, f64>,
    lambda: f64,
) -> Result<Model> {
    if phi.ncols() != map.m() {
        return Err(Error::DimensionMismatch {
            expected: map.m(),
            found: phi.ncols(),
        });
    }
    let (head, classes) = head_for(y)?;
    check_targets(y)?;
    let w = solve_ridge(phi, y, lambda)?;
    Model::new(map.clone(), w, head, lambda, classes)
}
