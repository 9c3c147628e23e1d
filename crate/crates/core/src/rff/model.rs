use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::{featurize, FeatureMap, CHUNK_ROWS};
use crate::error::{Error, Result};
use crate::linalg;
use crate::math::sigmoid;
use crate::transform::argmax;

/// How raw scores become class probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    /// One output; `p1 = clamp(score, 0, 1)`.
    RidgeBinary,
    /// One output per class; clamp to `[0, 1]` then renormalize.
    RidgeMultioutput,
    /// Sigmoid for a single output, softmax otherwise.
    Logistic,
}

/// A feature map with learned output weights (`m x c_out`).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    map: FeatureMap,
    weights: Mat<f64>,
    head: Head,
    lambda: f64,
    classes: usize,
}

impl Model {
    pub fn new(
        map: FeatureMap,
        weights: Mat<f64>,
        head: Head,
        lambda: f64,
        classes: usize,
    ) -> Result<Self> {
        if weights.nrows() != map.m() {
            return Err(Error::DimensionMismatch {
                expected: map.m(),
                found: weights.nrows(),
            });
        }
        let c_out = match (head, classes) {
            (_, c) if c < 2 => {
                return Err(Error::invalid(format!("class count must be >= 2, got {c}")))
            }
            (Head::RidgeBinary, 2) => 1,
            (Head::RidgeBinary, c) => {
                return Err(Error::invalid(format!(
                    "ridge-binary head needs 2 classes, got {c}"
                )))
            }
            (Head::RidgeMultioutput, c) => c,
            (Head::Logistic, 2) => 1,
            (Head::Logistic, c) => c,
        };
        if weights.ncols() != c_out {
            return Err(Error::DimensionMismatch {
                expected: c_out,
                found: weights.ncols(),
            });
        }
        if !linalg::all_finite(weights.as_ref()) {
            return Err(Error::invalid("model weights must be finite"));
        }
        Ok(Self {
            map,
            weights,
            head,
            lambda,
            classes,
        })
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn weights(&self) -> &Mat<f64> {
        &self.weights
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn m(&self) -> usize {
        self.map.m()
    }

    /// Raw scores `Phi W`, `n x c_out`.
    pub fn scores(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if x.ncols() != self.map.d() {
            return Err(Error::DimensionMismatch {
                expected: self.map.d(),
                found: x.ncols(),
            });
        }
        let n = x.nrows();
        let mut out = Mat::zeros(n, self.weights.ncols());
        let mut start = 0;
        while start < n {
            let rows = CHUNK_ROWS.min(n - start);
            let phi = featurize(&self.map, x.subrows(start, rows))?;
            let s = linalg::mul(phi.as_ref(), self.weights.as_ref());
            out.as_mut().subrows_mut(start, rows).copy_from(&s);
            start += rows;
        }
        Ok(out)
    }

    /// Scores from precomputed features (`n x m`).
    pub fn scores_from_features(&self, phi: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if phi.ncols() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: phi.ncols(),
            });
        }
        Ok(linalg::mul(phi, self.weights.as_ref()))
    }

    /// Class-probability rows, `n x classes`.
    pub fn predict_prob(&self, x: MatRef<'_, f64>) -> Result<Mat<f64>> {
        Ok(self.probs_from_scores(self.scores(x)?.as_ref()))
    }

    pub fn predict_prob_from_features(&self, phi: MatRef<'_, f64>) -> Result<Mat<f64>> {
        Ok(self.probs_from_scores(self.scores_from_features(phi)?.as_ref()))
    }

    /// Arg-max class per row, ties to the larger index.
    pub fn predict_class(&self, x: MatRef<'_, f64>) -> Result<Vec<usize>> {
        Ok(classes_from_probs(self.predict_prob(x)?.as_ref()))
    }

    pub fn probs_from_scores(&self, s: MatRef<'_, f64>) -> Mat<f64> {
        let n = s.nrows();
        let c = self.classes;
        let mut p = Mat::zeros(n, c);
        for i in 0..n {
            match (self.head, s.ncols()) {
                (Head::Logistic, 1) => {
                    p[(i, 0)] = sigmoid(-s[(i, 0)]);
                    p[(i, 1)] = sigmoid(s[(i, 0)]);
                }
                (Head::Logistic, _) => {
                    let max = (0..c).map(|j| s[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for j in 0..c {
                        let e = (s[(i, j)] - max).exp();
                        p[(i, j)] = e;
                        total += e;
                    }
                    for j in 0..c {
                        p[(i, j)] /= total;
                    }
                }
                (Head::RidgeBinary, _) => {
                    let p1 = s[(i, 0)].clamp(0.0, 1.0);
                    p[(i, 0)] = 1.0 - p1;
                    p[(i, 1)] = p1;
                }
                (Head::RidgeMultioutput, _) => {
                    let mut total = 0.0;
                    for j in 0..c {
                        let v = s[(i, j)].clamp(0.0, 1.0);
                        p[(i, j)] = v;
                        total += v;
                    }
                    for j in 0..c {
                        p[(i, j)] = if total > 0.0 {
                            p[(i, j)] / total
                        } else {
                            1.0 / c as f64
                        };
                    }
                }
            }
        }
        p
    }
}

pub(crate) fn classes_from_probs(p: MatRef<'_, f64>) -> Vec<usize> {
    let mut row = vec![0.0; p.ncols()];
    (0..p.nrows())
        .map(|i| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = p[(i, j)];
            }
            argmax(&row)
        })
        .collect()
}
