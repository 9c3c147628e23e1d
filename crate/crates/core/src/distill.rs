//! Teacher labeling, student training, and the risk estimators used to compare
//! them.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::data::{row_of, LabeledDataset, SharedOracle, UnlabeledPool};
use crate::error::{Error, Result};
use crate::rff::{fit_logistic, fit_ridge, FeatureMap, Model, TrainConfig};
use crate::transform::{argmax, temperature_scale_slice, Temperature};

/// Probabilities are floored here before taking logs in reported cross-entropies.
pub const XENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    Soft,
    Hard,
}

impl LabelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelMode::Soft => "soft",
            LabelMode::Hard => "hard",
        }
    }
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(LabelMode::Soft),
            "hard" => Ok(LabelMode::Hard),
            other => Err(Error::invalid(format!(
                "label mode must be soft or hard, got {other:?}"
            ))),
        }
    }
}

/// Pool instances with teacher-assigned label distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct DistilledDataset {
    features: Mat<f64>,
    targets: Mat<f64>,
    mode: LabelMode,
    teacher_id: String,
}

impl DistilledDataset {
    pub fn new(
        features: Mat<f64>,
        targets: Mat<f64>,
        mode: LabelMode,
        teacher_id: impl Into<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset("distillation"));
        }
        if targets.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: targets.nrows(),
            });
        }
        if targets.ncols() < 2 {
            return Err(Error::invalid(
                "distilled targets need at least two classes",
            ));
        }
        for i in 0..n {
            let row = row_of(&targets, i);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "target row {i} is not a simplex point: {row:?}"
                )));
            }
            if mode == LabelMode::Hard && row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::invalid(format!(
                    "hard target row {i} is not one-hot"
                )));
            }
        }
        Ok(Self {
            features,
            targets,
            mode,
            teacher_id: teacher_id.into(),
        })
    }

    /// Ground-truth labels as one-hot hard targets.
    pub fn from_labels(ds: &LabeledDataset, teacher_id: impl Into<String>) -> Result<Self> {
        Self::new(
            ds.features().clone(),
            ds.one_hot(),
            LabelMode::Hard,
            teacher_id,
        )
    }

    pub fn features(&self) -> &Mat<f64> {
        &self.features
    }

    pub fn targets(&self) -> &Mat<f64> {
        &self.targets
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn teacher_id(&self) -> &str {
        &self.teacher_id
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn classes(&self) -> usize {
        self.targets.ncols()
    }

    /// Arg-max of each target row.
    pub fn hard_labels(&self) -> Vec<usize> {
        predictions_from_probs(self.targets.as_ref())
    }
}

/// Label pool instances with the teacher's probabilities (soft) or their
/// arg-max one-hot (hard).
pub fn teacher_label(
    teacher: &Model,
    pool: &UnlabeledPool,
    mode: LabelMode,
) -> Result<DistilledDataset> {
    let probs = teacher.predict_prob(pool.features().as_ref())?;
    let id = format!("m{}-seed{}", teacher.m(), teacher.map().seed());
    distilled_from_probs(pool.features().clone(), probs, mode, id)
}

pub(crate) fn distilled_from_probs(
    features: Mat<f64>,
    probs: Mat<f64>,
    mode: LabelMode,
    teacher_id: String,
) -> Result<DistilledDataset> {
    let targets = match mode {
        LabelMode::Soft => probs,
        LabelMode::Hard => harden(probs.as_ref()),
    };
    DistilledDataset::new(features, targets, mode, teacher_id)
}

/// Row-wise hard threshold.
pub fn harden(probs: MatRef<'_, f64>) -> Mat<f64> {
    let mut out = Mat::zeros(probs.nrows(), probs.ncols());
    for i in 0..probs.nrows() {
        let top = argmax(&row_ref(probs, i));
        out[(i, top)] = 1.0;
    }
    out
}

fn row_ref(m: MatRef<'_, f64>, i: usize) -> Vec<f64> {
    (0..m.ncols()).map(|j| m[(i, j)]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudentHead {
    Ridge,
    Logistic,
}

/// Targets as the ridge trainer expects them: the class-1 column for binary
/// problems, every column otherwise.
pub fn ridge_targets(targets: MatRef<'_, f64>) -> Mat<f64> {
    if targets.ncols() == 2 {
        Mat::from_fn(targets.nrows(), 1, |i, _| targets[(i, 1)])
    } else {
        targets.to_owned()
    }
}

/// Fit a student on a distilled dataset with its own feature map.
pub fn train_student(
    map: &FeatureMap,
    ds: &DistilledDataset,
    cfg: &TrainConfig,
    head: StudentHead,
    seed: u64,
) -> Result<Model> {
    match head {
        StudentHead::Ridge => {
            let y = ridge_targets(ds.targets.as_ref());
            fit_ridge(map, ds.features.as_ref(), y.as_ref(), cfg.lambda)
        }
        StudentHead::Logistic => {
            fit_logistic(map, ds.features.as_ref(), ds.targets.as_ref(), cfg, seed)
        }
    }
}

pub fn predictions_from_probs(p: MatRef<'_, f64>) -> Vec<usize> {
    (0..p.nrows()).map(|i| argmax(&row_ref(p, i))).collect()
}

/// Fraction of rows where `pred != labels`.
pub fn zero_one_from_predictions(pred: &[usize], labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset("risk estimation"));
    }
    if pred.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: pred.len(),
        });
    }
    let wrong = pred.iter().zip(labels).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / labels.len() as f64)
}

/// Empirical 0-1 risk of `model` on `ds`.
pub fn zero_one_risk(model: &Model, ds: &LabeledDataset) -> Result<f64> {
    let pred = model.predict_class(ds.features().as_ref())?;
    zero_one_from_predictions(&pred, ds.labels())
}

/// `(1/n) sum_x sum_i p^t_i(x) 1(h(x) != i) = (1/n) sum_x (1 - p^t_{h(x)}(x))`.
pub fn distilled_risk_from(pred: &[usize], teacher_probs: MatRef<'_, f64>) -> Result<f64> {
    let n = teacher_probs.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset("distilled risk"));
    }
    if pred.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: pred.len(),
        });
    }
    let mut total = 0.0;
    for (i, &h) in pred.iter().enumerate() {
        for j in 0..teacher_probs.ncols() {
            if j != h {
                total += teacher_probs[(i, j)];
            }
        }
    }
    Ok(total / n as f64)
}

pub fn distilled_risk(h: &Model, teacher: &Model, x: MatRef<'_, f64>) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset("distilled risk"));
    }
    let pred = h.predict_class(x)?;
    let pt = teacher.predict_prob(x)?;
    distilled_risk_from(&pred, pt.as_ref())
}

/// `h*(x) = argmax_y p*_y(x)`.
#[derive(Debug, Clone)]
pub struct BayesClassifier {
    oracle: SharedOracle,
}

impl BayesClassifier {
    pub fn predict(&self, x: MatRef<'_, f64>) -> Vec<usize> {
        (0..x.nrows())
            .map(|i| argmax(&self.oracle.probs(&row_ref(x, i))))
            .collect()
    }
}

pub fn bayes_classifier(oracle: Option<&SharedOracle>) -> Result<BayesClassifier> {
    oracle
        .map(|o| BayesClassifier { oracle: o.clone() })
        .ok_or(Error::MissingOracle)
}

/// Monte Carlo Bayes risk `mean_x (1 - max_y p*_y(x))`.
pub fn bayes_risk(oracle: Option<&SharedOracle>, x: MatRef<'_, f64>) -> Result<f64> {
    let oracle = oracle.ok_or(Error::MissingOracle)?;
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset("bayes risk"));
    }
    let total: f64 = (0..x.nrows())
        .map(|i| {
            let p = oracle.probs(&row_ref(x, i));
            1.0 - p.iter().copied().fold(0.0, f64::max)
        })
        .sum();
    Ok(total / x.nrows() as f64)
}

/// Oracle probabilities for every row of `x`, `n x c`.
pub fn oracle_probs(oracle: &SharedOracle, x: MatRef<'_, f64>) -> Mat<f64> {
    let c = oracle.classes();
    let mut out = Mat::zeros(x.nrows(), c);
    for i in 0..x.nrows() {
        for (j, v) in oracle.probs(&row_ref(x, i)).into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproxVariant {
    /// `E ||p^t(x) - phi(p*(x))||_1`.
    L1,
    /// `E |p^t_1(x) - phi(p*(x))_1|`, binary problems only.
    BinaryMae,
}

pub fn teacher_approx_from_probs(
    teacher_probs: MatRef<'_, f64>,
    truth_probs: MatRef<'_, f64>,
    t: Temperature,
    variant: ApproxVariant,
) -> Result<f64> {
    let n = teacher_probs.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset("teacher approximation error"));
    }
    if truth_probs.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: truth_probs.nrows(),
        });
    }
    let c = teacher_probs.ncols();
    if truth_probs.ncols() != c {
        return Err(Error::DimensionMismatch {
            expected: c,
            found: truth_probs.ncols(),
        });
    }
    if variant == ApproxVariant::BinaryMae && c != 2 {
        return Err(Error::invalid(format!(
            "mean absolute error variant needs 2 classes, got {c}"
        )));
    }
    let mut total = 0.0;
    for i in 0..n {
        let target = temperature_scale_slice(&row_ref(truth_probs, i), t);
        total += match variant {
            ApproxVariant::L1 => (0..c)
                .map(|j| (teacher_probs[(i, j)] - target[j]).abs())
                .sum::<f64>(),
            ApproxVariant::BinaryMae => (teacher_probs[(i, 1)] - target[1]).abs(),
        };
    }
    Ok(total / n as f64)
}

pub fn teacher_approx_error(
    teacher: &Model,
    oracle: Option<&SharedOracle>,
    t: Temperature,
    x: MatRef<'_, f64>,
    variant: ApproxVariant,
) -> Result<f64> {
    let oracle = oracle.ok_or(Error::MissingOracle)?;
    let pt = teacher.predict_prob(x)?;
    teacher_approx_from_probs(pt.as_ref(), oracle_probs(oracle, x).as_ref(), t, variant)
}

/// Mean Shannon entropy in nats, `0 log 0 = 0`.
pub fn avg_entropy_from_probs(p: MatRef<'_, f64>) -> f64 {
    if p.nrows() == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let v = p[(i, j)];
            if v > 0.0 {
                total -= v * v.ln();
            }
        }
    }
    total / p.nrows() as f64
}

pub fn avg_entropy(model: &Model, x: MatRef<'_, f64>) -> Result<f64> {
    Ok(avg_entropy_from_probs(model.predict_prob(x)?.as_ref()))
}

/// Mean of `sum_i T_i (-ln max(q_i, XENT_FLOOR))`.
pub fn cross_entropy_from_probs(q: MatRef<'_, f64>, targets: MatRef<'_, f64>) -> Result<f64> {
    let n = q.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset("cross-entropy"));
    }
    if targets.nrows() != n || targets.ncols() != q.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: targets.nrows(),
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..q.ncols() {
            let t = targets[(i, j)];
            if t != 0.0 {
                total -= t * q[(i, j)].max(XENT_FLOOR).ln();
            }
        }
    }
    Ok(total / n as f64)
}

/// Risk summary of one model against labeled data with a known oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub zero_one: f64,
    /// Distilled risk against `teacher` on the same instances.
    pub distilled: f64,
    /// Nats.
    pub entropy_mean: f64,
    /// `E ||p(x) - phi(p*(x))||_1` for the requested `phi`.
    pub teacher_approx_l1: f64,
    /// Binary mean absolute error per temperature, keyed by its display form.
    pub mae_per_alpha: BTreeMap<String, f64>,
    pub eval_size: usize,
}

pub fn risk_report(
    model: &Model,
    teacher: &Model,
    ds: &LabeledDataset,
    phi: Temperature,
    alphas: &[Temperature],
) -> Result<RiskReport> {
    let x = ds.features().as_ref();
    let oracle = ds.truth().ok_or(Error::MissingOracle)?;
    let p = model.predict_prob(x)?;
    let truth = oracle_probs(oracle, x);
    let pred = predictions_from_probs(p.as_ref());
    let teacher_p = teacher.predict_prob(x)?;
    let mut mae_per_alpha = BTreeMap::new();
    if p.ncols() == 2 {
        for &a in alphas {
            let v =
                teacher_approx_from_probs(p.as_ref(), truth.as_ref(), a, ApproxVariant::BinaryMae)?;
            mae_per_alpha.insert(a.to_string(), v);
        }
    }
    Ok(RiskReport {
        zero_one: zero_one_from_predictions(&pred, ds.labels())?,
        distilled: distilled_risk_from(&pred, teacher_p.as_ref())?,
        entropy_mean: avg_entropy_from_probs(p.as_ref()),
        teacher_approx_l1: teacher_approx_from_probs(
            p.as_ref(),
            truth.as_ref(),
            phi,
            ApproxVariant::L1,
        )?,
        mae_per_alpha,
        eval_size: ds.len(),
    })
}

/// Header `x0..x{d-1},p0..p{c-1},mode,teacher_id`.
pub fn write_distilled_csv<W: Write>(ds: &DistilledDataset, out: W) -> Result<()> {
    let (d, c) = (ds.features.ncols(), ds.classes());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.extend((0..c).map(|j| format!("p{j}")));
    header.push("mode".into());
    header.push("teacher_id".into());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = (0..d).map(|j| ds.features[(i, j)].to_string()).collect();
        rec.extend((0..c).map(|j| ds.targets[(i, j)].to_string()));
        rec.push(ds.mode.as_str().into());
        rec.push(ds.teacher_id.clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_distilled_csv<R: Read>(input: R) -> Result<DistilledDataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let bad_header = |msg: &str| Error::Parse {
        offset: 0,
        message: msg.to_string(),
    };
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 5 || cols[cols.len() - 2] != "mode" || cols[cols.len() - 1] != "teacher_id" {
        return Err(bad_header("expected x*, p*, mode, teacher_id columns"));
    }
    let d = cols.iter().take_while(|c| c.starts_with('x')).count();
    let c = cols.len() - 2 - d;
    let expected: Vec<String> = (0..d)
        .map(|j| format!("x{j}"))
        .chain((0..c).map(|j| format!("p{j}")))
        .collect();
    if d == 0 || c < 2 || cols[..d + c].iter().zip(&expected).any(|(a, b)| *a != b) {
        return Err(bad_header("malformed feature/probability columns"));
    }

    let mut feats = Vec::new();
    let mut probs = Vec::new();
    let mut mode = None;
    let mut teacher_id = String::new();
    for rec in r.records() {
        let rec = rec?;
        let offset = rec.position().map_or(0, |p| p.byte() as usize);
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                offset,
                message: format!("bad number {s:?}"),
            })
        };
        for j in 0..d {
            feats.push(num(&rec[j])?);
        }
        for j in 0..c {
            probs.push(num(&rec[d + j])?);
        }
        let m: LabelMode = rec[d + c].parse()?;
        if *mode.get_or_insert(m) != m {
            return Err(Error::Parse {
                offset,
                message: "mixed label modes".into(),
            });
        }
        teacher_id = rec[d + c + 1].to_string();
    }
    let n = feats.len() / d;
    let features = Mat::from_fn(n, d, |i, j| feats[i * d + j]);
    let targets = Mat::from_fn(n, c, |i, j| probs[i * c + j]);
    DistilledDataset::new(
        features,
        targets,
        mode.unwrap_or(LabelMode::Soft),
        teacher_id,
    )
}
