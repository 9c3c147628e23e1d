//! Random ReLU feature maps and the trainers fitted on top of them.
//!
//! A model of complexity `m` is `f(x) = sum_k w_k max(<x, v_k>, 0)` with the
//! directions `v_k ~ N(0, I / sigma^2)` frozen at sampling time and only the
//! output weights `w` learned.

mod logistic;
mod model;
mod persist;
mod ridge;

use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng;

pub use logistic::{
    default_learning_rate, fit_logistic, fit_logistic_features, logistic_gradient,
    logistic_objective, BatchSize, LogisticFit, TrainConfig,
};
pub use model::{Head, Model};
pub use persist::{load_model, read_model, save_model, write_model};
pub use ridge::{fit_ridge, fit_ridge_features, normal_equation_residual, solve_ridge};

/// Rows to featurize at once when predicting on large inputs.
pub(crate) const CHUNK_ROWS: usize = 4096;

/// Frozen random directions `v_1..v_m` (rows of an `m x d` matrix).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    directions: Mat<f64>,
    sigma: f64,
    seed: u64,
}

impl FeatureMap {
    pub fn m(&self) -> usize {
        self.directions.nrows()
    }

    pub fn d(&self) -> usize {
        self.directions.ncols()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn directions(&self) -> &Mat<f64> {
        &self.directions
    }

    /// The map made of the first `m` directions. Equal to sampling with the
    /// same seed at complexity `m`.
    pub fn prefix(&self, m: usize) -> Result<FeatureMap> {
        if m == 0 || m > self.m() {
            return Err(Error::invalid(format!(
                "prefix length {m} not in 1..={}",
                self.m()
            )));
        }
        Ok(FeatureMap {
            directions: self.directions.as_ref().subrows(0, m).to_owned(),
            sigma: self.sigma,
            seed: self.seed,
        })
    }
}

/// Draw `m` directions in `d` dimensions with entries `N(0, 1/sigma^2)`.
///
/// Rows come off one stream in order, so the first `m'` rows of a larger map
/// are exactly the map of size `m'`.
pub fn sample_feature_map(m: usize, d: usize, sigma: f64, seed: u64) -> Result<FeatureMap> {
    if m == 0 || d == 0 {
        return Err(Error::invalid(format!(
            "need m >= 1 and d >= 1, got m = {m}, d = {d}"
        )));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let mut rng = rng::stream(seed, "feature_map", 0);
    let mut directions = Mat::zeros(m, d);
    for k in 0..m {
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            directions[(k, j)] = z / sigma;
        }
    }
    Ok(FeatureMap {
        directions,
        sigma,
        seed,
    })
}

/// `Phi[i, k] = max(<x_i, v_k>, 0)`.
pub fn featurize(map: &FeatureMap, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if x.ncols() != map.d() {
        return Err(Error::DimensionMismatch {
            expected: map.d(),
            found: x.ncols(),
        });
    }
    let mut phi = linalg::mul_nt(x, map.directions.as_ref());
    for k in 0..phi.ncols() {
        for i in 0..phi.nrows() {
            let v = phi[(i, k)];
            phi[(i, k)] = if v > 0.0 { v } else { 0.0 };
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            sample_feature_map(3, 2, 0.0, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            sample_feature_map(3, 2, -1.0, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(sample_feature_map(0, 2, 1.0, 1).is_err());
        let map = sample_feature_map(3, 2, 1.0, 1).unwrap();
        assert!(matches!(
            featurize(&map, Mat::zeros(4, 3).as_ref()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nested_maps_share_leading_rows() {
        let big = sample_feature_map(100, 7, 5.0, 42).unwrap();
        let small = sample_feature_map(50, 7, 5.0, 42).unwrap();
        assert_eq!(big.prefix(50).unwrap(), small);
    }

    #[test]
    fn entry_variance_is_inverse_sigma_squared() {
        let map = sample_feature_map(1000, 1000, 5.0, 3).unwrap();
        let v = map.directions();
        let n = (v.nrows() * v.ncols()) as f64;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for j in 0..v.ncols() {
            for i in 0..v.nrows() {
                sum += v[(i, j)];
                sq += v[(i, j)] * v[(i, j)];
            }
        }
        let mean = sum / n;
        let var = sq / n - mean * mean;
        assert!((var - 1.0 / 25.0).abs() < 0.01 / 25.0, "variance {var}");
    }

    #[test]
    fn orthogonal_input_gives_zero_row_and_relu_clamps() {
        let mut map = sample_feature_map(2, 3, 1.0, 0).unwrap();
        map.directions = Mat::from_fn(2, 3, |k, j| if j == k { 1.0 } else { 0.0 });
        let x = Mat::from_fn(2, 3, |i, j| [[0.0, 0.0, 4.0], [-3.0, 2.0, 1.0]][i][j]);
        let phi = featurize(&map, x.as_ref()).unwrap();
        assert_eq!((phi[(0, 0)], phi[(0, 1)]), (0.0, 0.0));
        assert_eq!((phi[(1, 0)], phi[(1, 1)]), (0.0, 2.0));
    }

    #[test]
    fn matches_naive_loop() {
        let map = sample_feature_map(3, 4, 0.7, 9).unwrap();
        let mut rng = rng::stream(5, "test", 0);
        let x = Mat::from_fn(5, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let phi = featurize(&map, x.as_ref()).unwrap();
        for i in 0..5 {
            for k in 0..3 {
                let mut dot = 0.0;
                for j in 0..4 {
                    dot += x[(i, j)] * map.directions()[(k, j)];
                }
                assert!((phi[(i, k)] - dot.max(0.0)).abs() <= 1e-14);
            }
        }
    }
}
