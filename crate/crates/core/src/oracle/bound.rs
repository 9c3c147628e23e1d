use serde::Serialize;

use crate::error::{Error, Result};

/// How the hidden constants of the bound are fixed, for output metadata.
pub const BOUND_CONSTANTS: &str =
    "estimation term 2*sqrt(ln(2|H|/delta)/(2n)) from two-sided Hoeffding plus a union bound; \
     Natarajan form 2*sqrt((d*ln(c*n) + ln(2/delta))/(2n)) with growth-function constant 1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Capacity {
    /// `ln |H|` of a finite class.
    LogCardinality(f64),
    /// Natarajan dimension `d` of a class over `classes` labels.
    Natarajan { d: f64, classes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub capacity: Capacity,
    pub delta: f64,
    pub n_u: usize,
    pub student_approx: f64,
    pub teacher_approx: f64,
}

/// Student estimation term alone.
pub fn estimation_term(capacity: Capacity, delta: f64, n_u: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if n_u == 0 {
        return Err(Error::invalid("bound needs at least one unlabeled example"));
    }
    let n = n_u as f64;
    let complexity = match capacity {
        Capacity::LogCardinality(log_h) => {
            if !(log_h.is_finite() && log_h >= 0.0) {
                return Err(Error::invalid(format!(
                    "ln |H| must be finite and nonnegative, got {log_h}"
                )));
            }
            log_h + (2.0 / delta).ln()
        }
        Capacity::Natarajan { d, classes } => {
            if !(d.is_finite() && d >= 0.0) || classes < 2 {
                return Err(Error::invalid(
                    "Natarajan capacity needs d >= 0 and at least two classes",
                ));
            }
            d * (classes as f64 * n).ln() + (2.0 / delta).ln()
        }
    };
    Ok(2.0 * (complexity / (2.0 * n)).sqrt())
}

/// Right-hand side of the excess-risk bound: estimation term plus the student
/// and teacher approximation terms.
pub fn bound_rhs(b: &BoundInputs) -> Result<f64> {
    if !(b.student_approx >= 0.0 && b.teacher_approx >= 0.0) {
        return Err(Error::invalid("approximation terms must be nonnegative"));
    }
    Ok(estimation_term(b.capacity, b.delta, b.n_u)? + b.student_approx + b.teacher_approx)
}
