use std::sync::Arc;

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{LabeledDataset, ProbabilityOracle, UnlabeledPool};
use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::rng;

/// Two-component mixture `N(+mu 1, I)` (class 1) / `N(-mu 1, I)` (class 0)
/// with equal priors. The log-likelihood ratio is `2 mu sum(x)`, so
/// `Pr(y = 1 | x) = sigmoid(2 mu sum(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixtureOracle {
    pub mu: f64,
}

impl ProbabilityOracle for GaussianMixtureOracle {
    fn classes(&self) -> usize {
        2
    }

    fn probs(&self, x: &[f64]) -> Vec<f64> {
        let t = 2.0 * self.mu * x.iter().sum::<f64>();
        vec![sigmoid(-t), sigmoid(t)]
    }
}

fn validate(n: usize, d: usize, mu: f64) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!(
            "need n >= 1 and d >= 1, got n = {n}, d = {d}"
        )));
    }
    if !mu.is_finite() {
        return Err(Error::invalid(format!("mu must be finite, got {mu}")));
    }
    Ok(())
}

fn sample_mixture(n: usize, d: usize, mu: f64, rng: &mut impl Rng) -> (Mat<f64>, Vec<usize>) {
    let mut features = Mat::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = usize::from(rng.random_bool(0.5));
        let shift = if y == 1 { mu } else { -mu };
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            features[(i, j)] = shift + z;
        }
        labels.push(y);
    }
    (features, labels)
}

/// Labeled sample from the two-Gaussian mixture, with its oracle attached.
pub fn gen_gaussian_binary(n: usize, d: usize, mu: f64, seed: u64) -> Result<LabeledDataset> {
    validate(n, d, mu)?;
    let mut rng = rng::stream(seed, "gen_gaussian_binary", 0);
    let (features, labels) = sample_mixture(n, d, mu, &mut rng);
    LabeledDataset::new(features, labels, 2)?.with_truth(Arc::new(GaussianMixtureOracle { mu }))
}

/// Instances from the marginal of the same mixture.
pub fn gen_unlabeled(n: usize, d: usize, mu: f64, seed: u64) -> Result<UnlabeledPool> {
    validate(n, d, mu)?;
    let mut rng = rng::stream(seed, "gen_unlabeled", 0);
    let (features, _) = sample_mixture(n, d, mu, &mut rng);
    UnlabeledPool::new(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_matches_paper_coefficient() {
        let ds = gen_gaussian_binary(250, 50, 0.1, 7).unwrap();
        assert_eq!(ds.len(), 250);
        let oracle = ds.truth().unwrap();
        let x = ds.row(0);
        let s: f64 = x.iter().sum();
        let expected = 1.0 / (1.0 + (-0.2 * s).exp());
        assert!((oracle.probs(&x)[1] - expected).abs() < 1e-15);
    }

    #[test]
    fn oracle_at_origin_and_ones() {
        let o = GaussianMixtureOracle { mu: 0.1 };
        assert_eq!(o.probs(&[0.0; 50]), vec![0.5, 0.5]);
        let p = o.probs(&[1.0; 50]);
        assert!((p[1] - 0.999_954_602_131_297_6).abs() < 1e-12);
    }

    #[test]
    fn oracle_outputs_simplex_points() {
        let o = GaussianMixtureOracle { mu: 0.3 };
        let mut rng = rng::stream(1, "test", 0);
        for _ in 0..100_000 {
            let x: Vec<f64> = (0..5)
                .map(|_| 20.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let p = o.probs(&x);
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(matches!(
            gen_gaussian_binary(0, 3, 0.1, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            gen_unlabeled(3, 0, 0.1, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(gen_unlabeled(3, 3, f64::NAN, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_gaussian_binary(20, 3, 0.5, 4).unwrap();
        let b = gen_gaussian_binary(20, 3, 0.5, 4).unwrap();
        assert_eq!(a.labels(), b.labels());
        assert_eq!(a.features(), b.features());
        assert_ne!(
            gen_gaussian_binary(20, 3, 0.5, 5).unwrap().features(),
            a.features()
        );
    }

    #[test]
    fn single_draw_with_zero_mean_is_standard_normal_scalar() {
        let pool = gen_unlabeled(1, 1, 0.0, 3).unwrap();
        assert_eq!((pool.len(), pool.dim()), (1, 1));
        assert!(pool.features()[(0, 0)].is_finite());
    }

    #[test]
    fn unlabeled_mean_is_near_zero() {
        let n = 1_000_000;
        let pool = gen_unlabeled(n, 2, 0.1, 12).unwrap();
        // marginal variance is 1 + mu^2
        let sd = (1.0f64 + 0.01).sqrt();
        for j in 0..2 {
            let mean: f64 = (0..n).map(|i| pool.features()[(i, j)]).sum::<f64>() / n as f64;
            assert!(
                mean.abs() < 3.0 * sd / (n as f64).sqrt(),
                "coordinate {j} mean {mean}"
            );
        }
    }

    #[test]
    fn class_conditional_means_converge() {
        let n = 100_000;
        let mu = 0.1;
        let ds = gen_gaussian_binary(n, 3, mu, 21).unwrap();
        for (class, sign) in [(0usize, -1.0), (1, 1.0)] {
            let rows: Vec<usize> = (0..n).filter(|&i| ds.labels()[i] == class).collect();
            let k = rows.len() as f64;
            for j in 0..3 {
                let mean: f64 = rows.iter().map(|&i| ds.features()[(i, j)]).sum::<f64>() / k;
                assert!(
                    (mean - sign * mu).abs() < 4.0 / k.sqrt(),
                    "class {class} coord {j}: {mean}"
                );
            }
        }
    }
}
