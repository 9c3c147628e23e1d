use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use super::bound::{bound_rhs, BoundInputs, Capacity};
use super::{enumerate_erm, erm, FiniteProblem};
use crate::data::row_of;
use crate::error::{Error, Result};
use crate::rng;
use crate::transform::{check_margin_slices, temperature_scale_slice, MarginCheck, Temperature};

/// Summary of repeated draws of the unlabeled sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub trials: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    pub bound: f64,
    pub student_approx: f64,
    pub teacher_approx: f64,
    pub mean_excess: f64,
    pub max_excess: f64,
    /// ERM labeling of each trial.
    pub labelings: Vec<Vec<usize>>,
}

fn empirical_weights(fp: &FiniteProblem, n_u: usize, rng: &mut rng::StreamRng) -> Vec<f64> {
    let dist = WeightedIndex::new(fp.weights()).expect("weights form a simplex");
    let mut counts = vec![0usize; fp.k()];
    for _ in 0..n_u {
        counts[dist.sample(rng)] += 1;
    }
    counts.into_iter().map(|c| c as f64 / n_u as f64).collect()
}

/// Draw `n_u` points per trial, run ERM on the teacher-labeled empirical risk,
/// and count trials whose exact excess risk exceeds the bound.
pub fn check_theorem(
    fp: &FiniteProblem,
    phi: Temperature,
    n_u: usize,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<TheoremCheck> {
    if trials == 0 {
        return Err(Error::invalid("theorem check needs at least one trial"));
    }
    for x in 0..fp.k() {
        let z = row_of(fp.pstar(), x);
        if let MarginCheck::Fail { index, .. } =
            check_margin_slices(&z, &temperature_scale_slice(&z, phi))?
        {
            return Err(Error::HypothesisUnmet { row: x, index });
        }
    }
    let erm_exact = enumerate_erm(fp);
    let teacher_approx = fp.teacher_approx(phi);
    let bound = bound_rhs(&BoundInputs {
        capacity: Capacity::LogCardinality(fp.log_cardinality()),
        delta,
        n_u,
        student_approx: erm_exact.student_approx,
        teacher_approx,
    })?;
    let bayes = fp.true_risk(&fp.bayes_labeling());

    let outcomes: Vec<(Vec<usize>, f64)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::stream(seed, "check_theorem", trial as u64);
            let w = empirical_weights(fp, n_u, &mut rng);
            let (h, _) = erm(fp.hypotheses(), &w, fp.teacher());
            let excess = fp.true_risk(&h) - bayes;
            (h, excess)
        })
        .collect();

    let violations = outcomes.iter().filter(|(_, e)| *e > bound).count();
    let mean_excess = outcomes.iter().map(|(_, e)| e).sum::<f64>() / trials as f64;
    let max_excess = outcomes
        .iter()
        .map(|(_, e)| *e)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(TheoremCheck {
        trials,
        violations,
        violation_fraction: violations as f64 / trials as f64,
        bound,
        student_approx: erm_exact.student_approx,
        teacher_approx,
        mean_excess,
        max_excess,
        labelings: outcomes.into_iter().map(|(h, _)| h).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationPoint {
    pub n_u: usize,
    pub median_deviation: f64,
    pub mean_deviation: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median and mean of `|R^t(h) - R^t_hat(h)|` over `trials` samples of each
/// size in `n_list`.
pub fn check_concentration(
    fp: &FiniteProblem,
    h: &[usize],
    n_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<ConcentrationPoint>> {
    fp.check_labeling(h)?;
    if trials == 0 || n_list.contains(&0) {
        return Err(Error::invalid(
            "concentration check needs positive trial and sample counts",
        ));
    }
    let exact = fp.distilled_risk(h);
    let mut out = Vec::with_capacity(n_list.len());
    for &n_u in n_list {
        let tag = format!("check_concentration/{n_u}");
        let mut devs: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = rng::stream(seed, &tag, trial as u64);
                let w = empirical_weights(fp, n_u, &mut rng);
                (super::weighted_risk(&w, fp.teacher(), h) - exact).abs()
            })
            .collect();
        let mean_deviation = devs.iter().sum::<f64>() / trials as f64;
        out.push(ConcentrationPoint {
            n_u,
            median_deviation: median(&mut devs),
            mean_deviation,
        });
    }
    Ok(out)
}
