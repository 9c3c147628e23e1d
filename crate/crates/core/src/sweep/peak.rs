use serde::Serialize;

use super::{Curve, SweepResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Peak {
    Interior {
        m: usize,
        test_err: f64,
    },
    /// No interior local maximum: the curve is monotone or only peaks at an
    /// endpoint.
    None,
}

/// Highest interior local maximum of `errs` over `ms`.
///
/// A point `i` (not the first or last) qualifies when `e[i] > e[i-1]` and
/// `e[i] >= e[i+1]`; among qualifying points the largest error wins, ties to
/// the smaller `m`.
pub fn locate_peak_in(ms: &[usize], errs: &[f64]) -> Result<Peak> {
    if ms.len() != errs.len() {
        return Err(Error::DimensionMismatch {
            expected: ms.len(),
            found: errs.len(),
        });
    }
    if ms.len() < 3 {
        return Err(Error::invalid(format!(
            "peak location needs at least 3 points, got {}",
            ms.len()
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for i in 1..ms.len() - 1 {
        let e = errs[i];
        if e > errs[i - 1] && e >= errs[i + 1] && best.is_none_or(|(_, b)| e > b) {
            best = Some((ms[i], e));
        }
    }
    Ok(best.map_or(Peak::None, |(m, test_err)| Peak::Interior { m, test_err }))
}

/// Peak of one curve's test error over its successful cells.
pub fn locate_peak(result: &SweepResult, curve: Curve, teacher_m: Option<usize>) -> Result<Peak> {
    let rows: Vec<_> = result
        .curve(curve, teacher_m)
        .into_iter()
        .filter(|r| r.is_ok())
        .collect();
    let ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.test_err.unwrap()).collect();
    locate_peak_in(&ms, &errs)
}
