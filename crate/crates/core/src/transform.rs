//! Maps from the probability simplex to itself, and a checker for the two
//! conditions a transformation must meet for the excess-risk bound: it keeps
//! the arg-max, and it never shrinks the gap between the top entry and any
//! other entry.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Slack allowed on the margin inequality for floating-point roundoff.
pub const MARGIN_TOLERANCE: f64 = 1e-12;

/// Simplex tolerance on the sum of entries.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Index of the largest entry; ties go to the larger index.
pub fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v >= z[best] {
            best = i;
        }
    }
    best
}

/// A point of the simplex with at least two coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!(
                "probability vector needs >= 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "probability entry {v} is not a nonnegative number"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Exponent of a temperature-scaling map. `Infinite` is hard thresholding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Finite(f64),
    Infinite,
}

impl Temperature {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha == f64::INFINITY {
            Ok(Temperature::Infinite)
        } else if alpha.is_finite() && alpha > 0.0 {
            Ok(Temperature::Finite(alpha))
        } else {
            Err(Error::invalid(format!(
                "temperature exponent must be > 0, got {alpha}"
            )))
        }
    }

    pub fn identity() -> Self {
        Temperature::Finite(1.0)
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Temperature::Finite(a) => write!(f, "{a}"),
            Temperature::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Temperature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Temperature::Infinite),
            other => {
                let a: f64 = other
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad temperature {other:?}")))?;
                Temperature::new(a)
            }
        }
    }
}

impl Serialize for Temperature {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Temperature::Finite(a) => s.serialize_f64(*a),
            Temperature::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) => Temperature::new(a),
            Raw::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// One-hot at the arg-max (larger index on ties).
pub fn hard_threshold(z: &ProbVector) -> ProbVector {
    ProbVector(hard_threshold_slice(z.as_slice()))
}

pub fn hard_threshold_slice(z: &[f64]) -> Vec<f64> {
    let top = argmax(z);
    (0..z.len())
        .map(|i| if i == top { 1.0 } else { 0.0 })
        .collect()
}

/// `phi_i(z) = z_i^alpha / sum_j z_j^alpha`, with `0^alpha = 0`.
pub fn temperature_scale(z: &ProbVector, t: Temperature) -> ProbVector {
    ProbVector(temperature_scale_slice(z.as_slice(), t))
}

/// Slice form of [`temperature_scale`]; the input is assumed to be a simplex
/// point. Powers are taken of `z_i / max(z)` so large exponents don't
/// underflow the whole vector.
pub fn temperature_scale_slice(z: &[f64], t: Temperature) -> Vec<f64> {
    match t {
        Temperature::Infinite => hard_threshold_slice(z),
        Temperature::Finite(a) if a == 1.0 => z.to_vec(),
        Temperature::Finite(a) => {
            let top = z[argmax(z)];
            let powered: Vec<f64> = z
                .iter()
                .map(|&v| if v == 0.0 { 0.0 } else { (v / top).powf(a) })
                .collect();
            let total: f64 = powered.iter().sum();
            powered.into_iter().map(|v| v / total).collect()
        }
    }
}

/// Which condition a candidate transformation broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Violation {
    /// The transformed arg-max differs; the witness is the transformed arg-max.
    Argmax,
    /// `max(w) - w_j < max(z) - z_j - tol` at the witness `j`.
    Margin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginCheck {
    Pass,
    Fail { index: usize, violation: Violation },
}

impl MarginCheck {
    pub fn passed(&self) -> bool {
        matches!(self, MarginCheck::Pass)
    }
}

/// Does `w = phi(z)` satisfy both the arg-max and margin conditions?
pub fn check_margin_preserving(z: &ProbVector, w: &ProbVector) -> Result<MarginCheck> {
    check_margin_slices(z.as_slice(), w.as_slice())
}

pub fn check_margin_slices(z: &[f64], w: &[f64]) -> Result<MarginCheck> {
    if z.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            found: w.len(),
        });
    }
    let (iz, iw) = (argmax(z), argmax(w));
    if iz != iw {
        return Ok(MarginCheck::Fail {
            index: iw,
            violation: Violation::Argmax,
        });
    }
    let (zmax, wmax) = (z[iz], w[iw]);
    for j in 0..z.len() {
        if wmax - w[j] < zmax - z[j] - MARGIN_TOLERANCE {
            return Ok(MarginCheck::Fail {
                index: j,
                violation: Violation::Margin,
            });
        }
    }
    Ok(MarginCheck::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Exp1};

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_and_squaring() {
        let z = pv(&[0.8, 0.2]);
        assert_eq!(temperature_scale(&z, Temperature::identity()), z);
        let w = temperature_scale(&z, Temperature::new(2.0).unwrap());
        assert!(close(w.as_slice(), &[16.0 / 17.0, 1.0 / 17.0], 1e-15));
        let h = temperature_scale(&pv(&[0.7, 0.3]), Temperature::Infinite);
        assert_eq!(h.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn rejects_nonpositive_exponent() {
        assert!(Temperature::new(0.0).is_err());
        assert!(Temperature::new(-2.0).is_err());
        assert!(Temperature::new(f64::NAN).is_err());
        assert_eq!(
            Temperature::new(f64::INFINITY).unwrap(),
            Temperature::Infinite
        );
        assert_eq!("inf".parse::<Temperature>().unwrap(), Temperature::Infinite);
    }

    #[test]
    fn hard_threshold_ties_and_idempotence() {
        assert_eq!(
            hard_threshold(&pv(&[0.3, 0.3, 0.4])).as_slice(),
            &[0.0, 0.0, 1.0]
        );
        assert_eq!(hard_threshold(&pv(&[0.5, 0.5])).as_slice(), &[0.0, 1.0]);
        let one_hot = pv(&[0.0, 1.0, 0.0]);
        assert_eq!(hard_threshold(&one_hot), one_hot);
    }

    #[test]
    fn checker_examples() {
        let z = pv(&[0.6, 0.4]);
        assert!(check_margin_preserving(&z, &z).unwrap().passed());
        let w = temperature_scale(&z, Temperature::new(2.0).unwrap());
        assert!(close(w.as_slice(), &[0.36 / 0.52, 0.16 / 0.52], 1e-15));
        assert!(check_margin_preserving(&z, &w).unwrap().passed());

        let z = pv(&[0.8, 0.2]);
        let w = temperature_scale(&z, Temperature::new(0.5).unwrap());
        assert!(close(w.as_slice(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
        assert_eq!(
            check_margin_preserving(&z, &w).unwrap(),
            MarginCheck::Fail {
                index: 1,
                violation: Violation::Margin
            }
        );
    }

    #[test]
    fn checker_flags_argmax_change_and_length_mismatch() {
        let r = check_margin_preserving(&pv(&[0.6, 0.4]), &pv(&[0.4, 0.6])).unwrap();
        assert_eq!(
            r,
            MarginCheck::Fail {
                index: 1,
                violation: Violation::Argmax
            }
        );
        assert!(check_margin_preserving(&pv(&[0.5, 0.5]), &pv(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn large_exponent_approaches_hard_threshold() {
        let mut rng = rng::stream(3, "transform-limit", 0);
        let mut tested = 0;
        while tested < 2000 {
            let raw: Vec<f64> = (0..4).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = raw.iter().sum();
            let z: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let mut sorted = z.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if sorted[0] - sorted[1] < 0.05 {
                continue;
            }
            tested += 1;
            let w = temperature_scale_slice(&z, Temperature::Finite(100.0));
            let h = hard_threshold_slice(&z);
            let l1: f64 = w.iter().zip(&h).map(|(a, b)| (a - b).abs()).sum();
            assert!(l1 <= 1e-3, "z = {z:?}: l1 {l1}");
        }
    }

    fn simplex(c: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, c).prop_filter_map("zero mass", |raw| {
            let s: f64 = raw.iter().sum();
            (s > 1e-9).then(|| raw.iter().map(|v| v / s).collect())
        })
    }

    proptest! {
        #[test]
        fn scaling_keeps_simplex_and_argmax(z in (2usize..12).prop_flat_map(simplex), a in 0.05f64..50.0) {
            let w = temperature_scale_slice(&z, Temperature::Finite(a));
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE);
            prop_assert_eq!(argmax(&w), argmax(&z));
        }

        #[test]
        fn sharpening_preserves_margins(z in (2usize..12).prop_flat_map(simplex), a in 1.0f64..20.0) {
            let w = temperature_scale_slice(&z, Temperature::Finite(a));
            prop_assert!(check_margin_slices(&z, &w).unwrap().passed());
            let h = hard_threshold_slice(&z);
            prop_assert!(check_margin_slices(&z, &h).unwrap().passed());
        }
    }
}
