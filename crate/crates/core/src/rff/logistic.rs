use faer::{Mat, MatRef};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{featurize, FeatureMap, Head, Model};
use crate::data::select_rows;
use crate::error::{Error, NumericalFailure, Result};
use crate::linalg;
use crate::math::{log_sum_exp, softplus};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BatchSize {
    #[default]
    Full,
    Rows(usize),
}

/// Optimizer settings for [`fit_logistic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "TrainConfig::default_steps")]
    pub steps: usize,
    /// `None` means `lr_scale * sigma^2 / m` for the map being trained.
    #[serde(default)]
    pub learning_rate: Option<f64>,
    /// Multiplier in the scaled default; `None` means 0.1.
    #[serde(default)]
    pub lr_scale: Option<f64>,
    #[serde(default)]
    pub batch_size: BatchSize,
    /// Record the objective after every step in [`LogisticFit::loss_log`].
    #[serde(default)]
    pub log_loss: bool,
}

impl TrainConfig {
    fn default_steps() -> usize {
        5000
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            steps: 5000,
            learning_rate: None,
            lr_scale: None,
            batch_size: BatchSize::Full,
            log_loss: false,
        }
    }
}

/// `0.1 sigma^2 / m`: keeps the function-space step size roughly independent
/// of the number of features.
pub fn default_learning_rate(map: &FeatureMap) -> f64 {
    0.1 * map.sigma() * map.sigma() / map.m() as f64
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: Model,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub loss_log: Vec<f64>,
}

/// Output columns for `c` classes: a single sigmoid logit in the binary case.
fn outputs(classes: usize) -> usize {
    if classes == 2 {
        1
    } else {
        classes
    }
}

/// Per-row loss `sum_i T_i (-log q_i)` and its derivative with respect to the
/// scores, written into `resid`.
fn row_loss(s: &[f64], t: &[f64], resid: &mut [f64], scratch: &mut Vec<f64>) -> f64 {
    let mass: f64 = t.iter().sum();
    if s.len() == 1 {
        // q1 = sigmoid(s), q0 = 1 - q1
        let z = s[0];
        let loss = t[1] * softplus(-z) + t[0] * softplus(z);
        resid[0] = mass * crate::math::sigmoid(z) - t[1];
        loss
    } else {
        let lse = log_sum_exp(s);
        scratch.clear();
        scratch.extend(s.iter().map(|v| (v - lse).exp()));
        let mut loss = 0.0;
        for i in 0..s.len() {
            if t[i] != 0.0 {
                loss += t[i] * (lse - s[i]);
            }
            resid[i] = mass * scratch[i] - t[i];
        }
        loss
    }
}

/// Data term and score residuals for scores `s` (`n x c_out`) against
/// targets `t` (`n x c`).
fn data_term(s: MatRef<'_, f64>, t: MatRef<'_, f64>) -> (f64, Mat<f64>) {
    let (n, k) = (s.nrows(), s.ncols());
    let mut resid = Mat::zeros(n, k);
    let mut srow = vec![0.0; k];
    let mut trow = vec![0.0; t.ncols()];
    let mut rrow = vec![0.0; k];
    let mut scratch = Vec::with_capacity(k);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..k {
            srow[j] = s[(i, j)];
        }
        for j in 0..t.ncols() {
            trow[j] = t[(i, j)];
        }
        total += row_loss(&srow, &trow, &mut rrow, &mut scratch);
        for j in 0..k {
            resid[(i, j)] = rrow[j];
        }
    }
    (total / n as f64, resid)
}

fn penalty(w: MatRef<'_, f64>, lambda: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else {
        let norm = w.norm_l2();
        lambda * norm * norm
    }
}

/// `(1/n) sum_n sum_i T_ni (-log q_i(x_n)) + lambda ||W||_F^2` with
/// `q = softmax(Phi W)` (sigmoid for a single output column).
pub fn logistic_objective(
    phi: MatRef<'_, f64>,
    t: MatRef<'_, f64>,
    w: MatRef<'_, f64>,
    lambda: f64,
) -> f64 {
    let s = linalg::mul(phi, w);
    data_term(s.as_ref(), t).0 + penalty(w, lambda)
}

/// Analytic gradient of [`logistic_objective`] with respect to `W`.
pub fn logistic_gradient(
    phi: MatRef<'_, f64>,
    t: MatRef<'_, f64>,
    w: MatRef<'_, f64>,
    lambda: f64,
) -> Mat<f64> {
    let s = linalg::mul(phi, w);
    let (_, resid) = data_term(s.as_ref(), t);
    gradient_from_resid(phi, resid.as_ref(), w, lambda)
}

fn gradient_from_resid(
    phi: MatRef<'_, f64>,
    resid: MatRef<'_, f64>,
    w: MatRef<'_, f64>,
    lambda: f64,
) -> Mat<f64> {
    let inv_n = 1.0 / phi.nrows() as f64;
    let mut g = linalg::mul_tn(phi, resid);
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            g[(i, j)] = g[(i, j)] * inv_n + 2.0 * lambda * w[(i, j)];
        }
    }
    g
}

fn check_simplex_rows(t: MatRef<'_, f64>) -> Result<()> {
    for i in 0..t.nrows() {
        let mut sum = 0.0;
        for j in 0..t.ncols() {
            let v = t[(i, j)];
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "target row {i} has invalid entry {v}"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "target row {i} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// Weighted cross-entropy fit by gradient descent from zero weights.
///
/// Targets are `n x c` simplex rows (one-hot rows for hard labels).
pub fn fit_logistic(
    map: &FeatureMap,
    x: MatRef<'_, f64>,
    t: MatRef<'_, f64>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Model> {
    let phi = featurize(map, x)?;
    Ok(fit_logistic_features(map, phi.as_ref(), t, cfg, seed)?.model)
}

/// [`fit_logistic`] on precomputed features, also returning the objective
/// trajectory.
pub fn fit_logistic_features(
    map: &FeatureMap,
    phi: MatRef<'_, f64>,
    t: MatRef<'_, f64>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LogisticFit> {
    let n = phi.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset("logistic fit"));
    }
    if phi.ncols() != map.m() {
        return Err(Error::DimensionMismatch {
            expected: map.m(),
            found: phi.ncols(),
        });
    }
    if t.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: t.nrows(),
        });
    }
    let classes = t.ncols();
    if classes < 2 {
        return Err(Error::invalid("logistic targets need at least two classes"));
    }
    if cfg.steps == 0 {
        return Err(Error::invalid("logistic training needs at least one step"));
    }
    if !(cfg.lambda.is_finite() && cfg.lambda >= 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be nonnegative, got {}",
            cfg.lambda
        )));
    }
    let lr = match (cfg.learning_rate, cfg.lr_scale) {
        (Some(lr), _) => lr,
        (None, Some(scale)) => scale * map.sigma() * map.sigma() / map.m() as f64,
        (None, None) => default_learning_rate(map),
    };
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::invalid(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    check_simplex_rows(t)?;

    let mut w = Mat::<f64>::zeros(map.m(), outputs(classes));
    let initial_objective = logistic_objective(phi, t, w.as_ref(), cfg.lambda);
    let mut loss_log = Vec::new();

    let batch = match cfg.batch_size {
        BatchSize::Rows(0) => return Err(Error::invalid("batch size must be positive")),
        BatchSize::Rows(b) if b < n => Some(b),
        _ => None,
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut epoch = 0u64;

    for step in 0..cfg.steps {
        let loss = match batch {
            None => {
                let s = linalg::mul(phi, w.as_ref());
                let (data, resid) = data_term(s.as_ref(), t);
                let g = gradient_from_resid(phi, resid.as_ref(), w.as_ref(), cfg.lambda);
                let loss = data + penalty(w.as_ref(), cfg.lambda);
                w -= lr * &g;
                loss
            }
            Some(b) => {
                if cursor + b > n {
                    order.shuffle(&mut rng::stream(seed, "fit_logistic", epoch));
                    epoch += 1;
                    cursor = 0;
                }
                let rows = &order[cursor..cursor + b];
                cursor += b;
                let pb = select_rows(phi, rows);
                let tb = select_rows(t, rows);
                let s = linalg::mul(pb.as_ref(), w.as_ref());
                let (data, resid) = data_term(s.as_ref(), tb.as_ref());
                let g = gradient_from_resid(pb.as_ref(), resid.as_ref(), w.as_ref(), cfg.lambda);
                let loss = data + penalty(w.as_ref(), cfg.lambda);
                w -= lr * &g;
                loss
            }
        };
        if !loss.is_finite() {
            return Err(Error::Numerical(NumericalFailure::Loss {
                step,
                value: loss,
            }));
        }
        if cfg.log_loss {
            loss_log.push(loss);
        }
    }

    if !linalg::all_finite(w.as_ref()) {
        return Err(Error::Numerical(NumericalFailure::Loss {
            step: cfg.steps,
            value: f64::NAN,
        }));
    }
    let final_objective = logistic_objective(phi, t, w.as_ref(), cfg.lambda);
    if !final_objective.is_finite() {
        return Err(Error::Numerical(NumericalFailure::Loss {
            step: cfg.steps,
            value: final_objective,
        }));
    }
    let model = Model::new(map.clone(), w, Head::Logistic, cfg.lambda, classes)?;
    Ok(LogisticFit {
        model,
        initial_objective,
        final_objective,
        loss_log,
    })
}
