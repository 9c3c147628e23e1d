//! Brute-force checks on problems small enough to enumerate: exhaustive ERM
//! over finite hypothesis classes, the excess-risk bound, concentration of the
//! empirical distilled risk, and finite-difference gradient checks.

mod bound;
mod checks;
mod gradcheck;

use faer::Mat;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::data::row_of;
use crate::error::{Error, Result};
use crate::rng;
use crate::transform::{argmax, temperature_scale_slice, Temperature};

pub use bound::{bound_rhs, estimation_term, BoundInputs, Capacity, BOUND_CONSTANTS};
pub use checks::{check_concentration, check_theorem, ConcentrationPoint, TheoremCheck};
pub use gradcheck::{grad_check, grad_check_at, FINITE_DIFFERENCE_STEP};

/// Largest support size accepted for enumeration.
pub const MAX_SUPPORT: usize = 12;

/// Largest number of labelings enumerated.
pub const MAX_LABELINGS: usize = 1 << 24;

/// Hypotheses a student may choose from, as labelings of the support points.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisSet {
    /// Every one of the `c^k` labelings.
    All,
    Explicit(Vec<Vec<usize>>),
}

/// A distribution over `k` points together with the true and teacher class
/// probabilities at each point.
#[derive(Debug, Clone)]
pub struct FiniteProblem {
    weights: Vec<f64>,
    pstar: Mat<f64>,
    teacher: Mat<f64>,
    hypotheses: HypothesisSet,
}

fn check_simplex(values: &[f64], what: &str) -> Result<()> {
    let sum: f64 = values.iter().sum();
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "{what} is not a probability vector: {values:?}"
        )));
    }
    Ok(())
}

impl FiniteProblem {
    pub fn new(weights: Vec<f64>, pstar: Mat<f64>, teacher: Mat<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::invalid("finite problem needs at least one point"));
        }
        if k > MAX_SUPPORT {
            return Err(Error::TooLarge {
                what: "support size k",
                value: k,
                limit: MAX_SUPPORT,
            });
        }
        let c = pstar.ncols();
        if c < 2 {
            return Err(Error::invalid("finite problem needs at least two classes"));
        }
        if pstar.nrows() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: pstar.nrows(),
            });
        }
        if teacher.nrows() != k || teacher.ncols() != c {
            return Err(Error::DimensionMismatch {
                expected: k * c,
                found: teacher.nrows() * teacher.ncols(),
            });
        }
        check_simplex(&weights, "weights")?;
        for x in 0..k {
            check_simplex(&row_of(&pstar, x), &format!("p* row {x}"))?;
            check_simplex(&row_of(&teacher, x), &format!("teacher row {x}"))?;
        }
        labeling_count(k, c)?;
        Ok(Self {
            weights,
            pstar,
            teacher,
            hypotheses: HypothesisSet::All,
        })
    }

    /// Restrict the student to an explicit list of labelings.
    pub fn with_hypotheses(mut self, hypotheses: Vec<Vec<usize>>) -> Result<Self> {
        if hypotheses.is_empty() {
            return Err(Error::invalid("hypothesis set is empty"));
        }
        for h in &hypotheses {
            self.check_labeling(h)?;
        }
        self.hypotheses = HypothesisSet::Explicit(hypotheses);
        Ok(self)
    }

    /// Random problem: exponential weights, `p*` rows as softmax of scaled
    /// normals, and a teacher `(1 - noise) phi(p*) + noise u` with `u` another
    /// random simplex row.
    pub fn random(
        k: usize,
        c: usize,
        phi: Temperature,
        teacher_noise: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&teacher_noise) {
            return Err(Error::invalid(format!(
                "teacher noise must lie in [0, 1], got {teacher_noise}"
            )));
        }
        if k == 0 || k > MAX_SUPPORT {
            return Err(Error::TooLarge {
                what: "support size k",
                value: k,
                limit: MAX_SUPPORT,
            });
        }
        let mut rng = rng::stream(seed, "finite_problem", 0);
        let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let random_row = |rng: &mut rng::StreamRng| {
            let s: Vec<f64> = (0..c)
                .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = s.iter().map(|v| (v - top).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|v| v / z).collect::<Vec<f64>>()
        };
        let mut pstar = Mat::zeros(k, c);
        let mut teacher = Mat::zeros(k, c);
        for x in 0..k {
            let p = random_row(&mut rng);
            let u = random_row(&mut rng);
            let target = temperature_scale_slice(&p, phi);
            for j in 0..c {
                pstar[(x, j)] = p[j];
                teacher[(x, j)] = (1.0 - teacher_noise) * target[j] + teacher_noise * u[j];
            }
        }
        Self::new(weights, pstar, teacher)
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn classes(&self) -> usize {
        self.pstar.ncols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pstar(&self) -> &Mat<f64> {
        &self.pstar
    }

    pub fn teacher(&self) -> &Mat<f64> {
        &self.teacher
    }

    pub fn hypotheses(&self) -> &HypothesisSet {
        &self.hypotheses
    }

    /// `ln |H|`.
    pub fn log_cardinality(&self) -> f64 {
        match &self.hypotheses {
            HypothesisSet::All => self.k() as f64 * (self.classes() as f64).ln(),
            HypothesisSet::Explicit(h) => (h.len() as f64).ln(),
        }
    }

    fn check_labeling(&self, h: &[usize]) -> Result<()> {
        if h.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: h.len(),
            });
        }
        if let Some(&bad) = h.iter().find(|&&y| y >= self.classes()) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {} classes",
                self.classes()
            )));
        }
        Ok(())
    }

    /// `sum_x w_x (1 - p^t_{h(x)}(x))`.
    pub fn distilled_risk(&self, h: &[usize]) -> f64 {
        weighted_risk(&self.weights, &self.teacher, h)
    }

    /// `sum_x w_x (1 - p*_{h(x)}(x))`.
    pub fn true_risk(&self, h: &[usize]) -> f64 {
        weighted_risk(&self.weights, &self.pstar, h)
    }

    /// Pointwise arg-max of `p*`.
    pub fn bayes_labeling(&self) -> Vec<usize> {
        pointwise_argmax(&self.pstar)
    }

    /// `sum_x w_x ||p^t(x) - phi(p*(x))||_1`.
    pub fn teacher_approx(&self, phi: Temperature) -> f64 {
        (0..self.k())
            .map(|x| {
                let target = temperature_scale_slice(&row_of(&self.pstar, x), phi);
                let l1: f64 = (0..self.classes())
                    .map(|j| (self.teacher[(x, j)] - target[j]).abs())
                    .sum();
                self.weights[x] * l1
            })
            .sum()
    }
}

fn weighted_risk(weights: &[f64], probs: &Mat<f64>, h: &[usize]) -> f64 {
    weights
        .iter()
        .zip(h)
        .enumerate()
        .map(|(x, (w, &y))| w * (1.0 - probs[(x, y)]))
        .sum()
}

fn pointwise_argmax(probs: &Mat<f64>) -> Vec<usize> {
    (0..probs.nrows())
        .map(|x| argmax(&row_of(probs, x)))
        .collect()
}

fn labeling_count(k: usize, c: usize) -> Result<usize> {
    let mut count = 1usize;
    for _ in 0..k {
        count = count
            .checked_mul(c)
            .filter(|&v| v <= MAX_LABELINGS)
            .ok_or(Error::TooLarge {
                what: "labelings c^k",
                value: c.checked_pow(k as u32).unwrap_or(usize::MAX),
                limit: MAX_LABELINGS,
            })?;
    }
    Ok(count)
}

/// Outcome of exhaustive ERM on the exact distilled risk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErmResult {
    pub labeling: Vec<usize>,
    pub risk: f64,
    /// `min_h R^t(h)` over every function of the support points.
    pub unrestricted_risk: f64,
    /// `risk - unrestricted_risk`.
    pub student_approx: f64,
}

/// Minimize `sum_x weights_x (1 - probs_{h(x)}(x))` over the hypothesis set.
/// Ties go to the lexicographically smallest labeling.
pub(crate) fn erm(set: &HypothesisSet, weights: &[f64], probs: &Mat<f64>) -> (Vec<usize>, f64) {
    match set {
        HypothesisSet::All => {
            let (k, c) = (weights.len(), probs.ncols());
            let mut h = vec![0usize; k];
            let mut best = (h.clone(), weighted_risk(weights, probs, &h));
            // odometer over labelings in lexicographic order
            loop {
                let mut pos = k;
                loop {
                    if pos == 0 {
                        return best;
                    }
                    pos -= 1;
                    h[pos] += 1;
                    if h[pos] < c {
                        break;
                    }
                    h[pos] = 0;
                }
                let r = weighted_risk(weights, probs, &h);
                if r < best.1 {
                    best = (h.clone(), r);
                }
            }
        }
        HypothesisSet::Explicit(list) => {
            let mut best: Option<(Vec<usize>, f64)> = None;
            for h in list {
                let r = weighted_risk(weights, probs, h);
                let better = match &best {
                    None => true,
                    Some((bh, br)) => r < *br || (r == *br && h < bh),
                };
                if better {
                    best = Some((h.clone(), r));
                }
            }
            best.expect("hypothesis set is non-empty")
        }
    }
}

/// Exhaustive ERM on the exact teacher-distilled risk.
pub fn enumerate_erm(fp: &FiniteProblem) -> ErmResult {
    let (labeling, risk) = erm(&fp.hypotheses, &fp.weights, &fp.teacher);
    let unrestricted_risk = fp.distilled_risk(&pointwise_argmax(&fp.teacher));
    ErmResult {
        labeling,
        risk,
        unrestricted_risk,
        student_approx: (risk - unrestricted_risk).max(0.0),
    }
}
