use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rff::{featurize, logistic_gradient, logistic_objective, FeatureMap, TrainConfig};
use crate::rng;

pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;

/// Max abs difference between the analytic gradient and central differences,
/// evaluated at `w`.
pub fn grad_check_at(
    phi: MatRef<'_, f64>,
    t: MatRef<'_, f64>,
    w: MatRef<'_, f64>,
    lambda: f64,
) -> f64 {
    let analytic = logistic_gradient(phi, t, w, lambda);
    let mut probe = w.to_owned();
    let mut worst = 0.0f64;
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + FINITE_DIFFERENCE_STEP;
            let up = logistic_objective(phi, t, probe.as_ref(), lambda);
            probe[(i, j)] = orig - FINITE_DIFFERENCE_STEP;
            let down = logistic_objective(phi, t, probe.as_ref(), lambda);
            probe[(i, j)] = orig;
            let numeric = (up - down) / (2.0 * FINITE_DIFFERENCE_STEP);
            worst = worst.max((numeric - analytic[(i, j)]).abs());
        }
    }
    worst
}

/// [`grad_check_at`] on a small instance at random weights drawn from the
/// map's seed.
pub fn grad_check(
    map: &FeatureMap,
    x: MatRef<'_, f64>,
    t: MatRef<'_, f64>,
    cfg: &TrainConfig,
) -> Result<f64> {
    let (n, m, c) = (x.nrows(), map.m(), t.ncols());
    if n == 0 || n > 10 || m > 8 || !(2..=4).contains(&c) {
        return Err(Error::invalid(format!(
            "gradient check needs n <= 10, m <= 8, 2 <= c <= 4; got n={n}, m={m}, c={c}"
        )));
    }
    if t.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: t.nrows(),
        });
    }
    let phi = featurize(map, x)?;
    let c_out = if c == 2 { 1 } else { c };
    let mut rng = rng::stream(map.seed(), "grad_check", 0);
    let w = Mat::from_fn(m, c_out, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
    Ok(grad_check_at(phi.as_ref(), t, w.as_ref(), cfg.lambda))
}
