//! Named verification suites with JSON-friendly reports.

use faer::Mat;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::oracle::{
    check_concentration, check_theorem, grad_check, FiniteProblem, BOUND_CONSTANTS,
};
use crate::rff::{sample_feature_map, TrainConfig};
use crate::rng;
use crate::transform::{check_margin_slices, temperature_scale_slice, Temperature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Margins,
    Theorem,
    Concentration,
    Gradcheck,
}

impl Check {
    pub const ALL: [Check; 4] = [
        Check::Margins,
        Check::Theorem,
        Check::Concentration,
        Check::Gradcheck,
    ];

    pub fn default_trials(&self) -> usize {
        match self {
            Check::Margins => 100_000,
            Check::Theorem | Check::Concentration => 200,
            Check::Gradcheck => 10,
        }
    }
}

impl std::str::FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "margins" => Ok(Check::Margins),
            "theorem" => Ok(Check::Theorem),
            "concentration" => Ok(Check::Concentration),
            "gradcheck" => Ok(Check::Gradcheck),
            other => Err(Error::invalid(format!("unknown check {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    AtMost(f64),
    AtLeast(f64),
    Within([f64; 2]),
}

impl Threshold {
    fn admits(&self, v: f64) -> bool {
        match *self {
            Threshold::AtMost(t) => v <= t,
            Threshold::AtLeast(t) => v >= t,
            Threshold::Within([lo, hi]) => (lo..=hi).contains(&v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub parameters: serde_json::Value,
    pub statistic: f64,
    pub threshold: Threshold,
    pub pass: bool,
}

impl CheckReport {
    fn new(
        name: impl Into<String>,
        parameters: serde_json::Value,
        statistic: f64,
        threshold: Threshold,
    ) -> Self {
        Self {
            name: name.into(),
            parameters,
            statistic,
            pass: threshold.admits(statistic),
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub version: String,
    pub seed: u64,
    pub bound_constants: String,
    pub checks: Vec<CheckReport>,
    pub pass: bool,
}

pub const MARGIN_CLASSES: [usize; 3] = [2, 5, 10];
pub const MARGIN_ALPHAS: [Temperature; 5] = [
    Temperature::Finite(1.0),
    Temperature::Finite(1.5),
    Temperature::Finite(2.0),
    Temperature::Finite(5.0),
    Temperature::Infinite,
];

/// Random simplex point: normalized exponentials, every fourth one sharpened
/// so near-one-hot vectors are covered too.
fn random_simplex(c: usize, sharpen: bool, rng: &mut rng::StreamRng) -> Vec<f64> {
    let mut z: Vec<f64> = (0..c).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    if sharpen {
        z.iter_mut().for_each(|v| *v = v.powi(6));
    }
    let s: f64 = z.iter().sum();
    z.into_iter().map(|v| v / s).collect()
}

/// Count margin-checker failures of `phi` over `points` random vectors per
/// class count.
pub fn margin_violations(
    classes: usize,
    phi: Temperature,
    points: usize,
    seed: u64,
) -> Result<usize> {
    let mut rng = rng::stream(seed, "verify/margins", classes as u64);
    let mut fails = 0;
    for i in 0..points {
        let z = random_simplex(classes, i % 4 == 3, &mut rng);
        if !check_margin_slices(&z, &temperature_scale_slice(&z, phi))?.passed() {
            fails += 1;
        }
    }
    Ok(fails)
}

fn margins(points: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for c in MARGIN_CLASSES {
        for phi in MARGIN_ALPHAS {
            let v = margin_violations(c, phi, points, seed)?;
            let params = json!({ "classes": c, "alpha": phi.to_string(), "points": points });
            out.push(CheckReport::new(
                format!("margins c={c} alpha={phi}"),
                params,
                v as f64,
                Threshold::AtMost(0.0),
            ));
        }
    }
    // negative control: alpha < 1 shrinks margins and must be caught
    let v = margin_violations(5, Temperature::Finite(0.5), points, seed)?;
    let params = json!({ "classes": 5, "alpha": "0.5", "points": points });
    out.push(CheckReport::new(
        "margins negative control alpha=0.5",
        params,
        v as f64,
        Threshold::AtLeast(1.0),
    ));
    Ok(out)
}

/// The ten problems of the theorem suite: `(k, c, teacher_noise)` with
/// `k` in 3..=8 and `c` in {2, 3}.
pub fn theorem_problems() -> Vec<(usize, usize, f64)> {
    (0..10)
        .map(|i| (3 + i % 6, 2 + i % 2, 0.125 * (i % 3) as f64))
        .collect()
}

pub const THEOREM_DELTA: f64 = 0.1;
pub const THEOREM_N_U: usize = 500;

fn theorem(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for (i, (k, c, noise)) in theorem_problems().into_iter().enumerate() {
        for phi in [Temperature::Finite(2.0), Temperature::Infinite] {
            let fp = FiniteProblem::random(
                k,
                c,
                phi,
                noise,
                rng::stream(seed, "verify/theorem", i as u64).random(),
            )?;
            let r = check_theorem(&fp, phi, THEOREM_N_U, THEOREM_DELTA, trials, seed)?;
            let params = json!({
                "problem": i, "k": k, "classes": c, "teacher_noise": noise, "alpha": phi.to_string(),
                "n_u": THEOREM_N_U, "delta": THEOREM_DELTA, "trials": trials,
                "bound": r.bound, "mean_excess": r.mean_excess, "max_excess": r.max_excess,
                "student_approx": r.student_approx, "teacher_approx": r.teacher_approx,
            });
            out.push(CheckReport::new(
                format!("theorem problem={i} alpha={phi}"),
                params,
                r.violation_fraction,
                Threshold::AtMost(THEOREM_DELTA),
            ));
        }
    }
    Ok(out)
}

pub const CONCENTRATION_N: [usize; 3] = [250, 1000, 4000];

fn concentration(trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let fp = FiniteProblem::random(8, 3, Temperature::identity(), 0.3, seed)?;
    let mut rng = rng::stream(seed, "verify/concentration", 0);
    let h: Vec<usize> = (0..fp.k())
        .map(|_| rng.random_range(0..fp.classes()))
        .collect();
    let pts = check_concentration(&fp, &h, &CONCENTRATION_N, trials, seed)?;
    Ok(pts
        .windows(2)
        .map(|w| {
            let ratio = w[0].median_deviation / w[1].median_deviation;
            let params = json!({
                "n_from": w[0].n_u, "n_to": w[1].n_u, "trials": trials,
                "median_from": w[0].median_deviation, "median_to": w[1].median_deviation,
            });
            CheckReport::new(
                format!("concentration n={}->{}", w[0].n_u, w[1].n_u),
                params,
                ratio,
                Threshold::Within([1.4, 2.9]),
            )
        })
        .collect())
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-6;

fn gradcheck(instances: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = rng::stream(seed, "verify/gradcheck", i as u64);
        let n = rng.random_range(4..=10);
        let m = rng.random_range(2..=8);
        let c = rng.random_range(2..=4);
        let d = rng.random_range(1..=5);
        let x = Mat::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut t = Mat::zeros(n, c);
        for r in 0..n {
            let p = random_simplex(c, false, &mut rng);
            for j in 0..c {
                t[(r, j)] = p[j];
            }
        }
        let map = sample_feature_map(m, d, 1.0, rng.random())?;
        let cfg = TrainConfig {
            lambda: 0.01,
            ..Default::default()
        };
        worst = worst.max(grad_check(&map, x.as_ref(), t.as_ref(), &cfg)?);
    }
    let params =
        json!({ "instances": instances, "epsilon": crate::oracle::FINITE_DIFFERENCE_STEP });
    Ok(vec![CheckReport::new(
        "gradcheck",
        params,
        worst,
        Threshold::AtMost(GRADCHECK_TOLERANCE),
    )])
}

/// Run one suite; `trials` replaces its default count.
pub fn run_check(check: Check, trials: Option<usize>, seed: u64) -> Result<Vec<CheckReport>> {
    let trials = trials.unwrap_or_else(|| check.default_trials());
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    match check {
        Check::Margins => margins(trials, seed),
        Check::Theorem => theorem(trials, seed),
        Check::Concentration => concentration(trials, seed),
        Check::Gradcheck => gradcheck(trials, seed),
    }
}

pub fn run_checks(checks: &[Check], trials: Option<usize>, seed: u64) -> Result<VerifyReport> {
    let mut all = Vec::new();
    for &c in checks {
        all.extend(run_check(c, trials, seed)?);
    }
    Ok(VerifyReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        bound_constants: BOUND_CONSTANTS.to_string(),
        pass: all.iter().all(|c| c.pass),
        checks: all,
    })
}
