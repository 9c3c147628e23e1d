//! Double-descent sweeps: teachers at every complexity, students trained on
//! their labels, all evaluated on one shared test split.

mod config;
mod emit;
mod peak;

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use faer::{Mat, MatRef};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    binarize, gen_gaussian_binary, gen_unlabeled, inject_label_noise, load_idx_dataset, parse_idx,
    read_labeled_csv, split, LabeledDataset, UnlabeledPool,
};
use crate::distill::{
    avg_entropy_from_probs, cross_entropy_from_probs, distilled_from_probs, oracle_probs,
    predictions_from_probs, ridge_targets, teacher_approx_from_probs, zero_one_from_predictions,
    ApproxVariant, DistilledDataset, LabelMode, XENT_FLOOR,
};
use crate::error::{Error, Result};
use crate::rff::{
    featurize, fit_logistic_features, fit_ridge_features, sample_feature_map, FeatureMap, Model,
    TrainConfig,
};
use crate::rng;
use crate::transform::Temperature;

pub use config::{DataSpec, HeadKind, Seeds, SweepConfig};
pub use emit::{emit, read_json, write_csv, write_json, OutputFormat, CSV_HEADER};
pub use peak::{locate_peak, locate_peak_in, Peak};

/// Temperatures reported in the `mae_alpha_*` columns.
pub const MAE_ALPHAS: [Temperature; 4] = [
    Temperature::Finite(1.0),
    Temperature::Finite(2.0),
    Temperature::Finite(5.0),
    Temperature::Infinite,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    Teacher,
    StudentSoft,
    StudentHard,
}

impl Curve {
    pub fn as_str(&self) -> &'static str {
        match self {
            Curve::Teacher => "teacher",
            Curve::StudentSoft => "student_soft",
            Curve::StudentHard => "student_hard",
        }
    }

    pub fn student(mode: LabelMode) -> Self {
        match mode {
            LabelMode::Soft => Curve::StudentSoft,
            LabelMode::Hard => Curve::StudentHard,
        }
    }
}

impl std::str::FromStr for Curve {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teacher" => Ok(Curve::Teacher),
            "student_soft" => Ok(Curve::StudentSoft),
            "student_hard" => Ok(Curve::StudentHard),
            other => Err(Error::invalid(format!("unknown curve {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One `(m, curve, teacher_m)` cell. Metrics are `None` for failed cells
/// and, for the MAE columns, when the problem is not binary or has no oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub curve: Curve,
    pub teacher_m: Option<usize>,
    pub test_err: Option<f64>,
    pub train_err: Option<f64>,
    pub test_xent: Option<f64>,
    pub train_xent: Option<f64>,
    pub entropy: Option<f64>,
    pub mae_alpha_1: Option<f64>,
    pub mae_alpha_2: Option<f64>,
    pub mae_alpha_5: Option<f64>,
    pub mae_alpha_inf: Option<f64>,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default)]
    pub wall_time_secs: f64,
}

impl SweepRow {
    fn failed(m: usize, curve: Curve, teacher_m: Option<usize>, message: String) -> Self {
        Self {
            m,
            curve,
            teacher_m,
            test_err: None,
            train_err: None,
            test_xent: None,
            train_xent: None,
            entropy: None,
            mae_alpha_1: None,
            mae_alpha_2: None,
            mae_alpha_5: None,
            mae_alpha_inf: None,
            status: CellStatus::Failed,
            message: Some(message),
            wall_time_secs: 0.0,
        }
    }

    pub fn key(&self) -> (Curve, Option<usize>, usize) {
        (self.curve, self.teacher_m, self.m)
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub teacher: usize,
    pub student: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub version: String,
    pub config_hash: String,
    pub config: SweepConfig,
    pub seeds: Seeds,
    pub workers: usize,
    pub sizes: SplitSizes,
    pub entropy_unit: String,
    pub xent_floor: f64,
    /// Train cross-entropy at or below test cross-entropy for the teacher at
    /// the largest complexity; reported, never enforced.
    pub teacher_train_xent_le_test_xent: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Rows of one curve, ordered by `m`.
    pub fn curve(&self, curve: Curve, teacher_m: Option<usize>) -> Vec<&SweepRow> {
        let mut rows: Vec<&SweepRow> = self
            .rows
            .iter()
            .filter(|r| r.curve == curve && r.teacher_m == teacher_m)
            .collect();
        rows.sort_by_key(|r| r.m);
        rows
    }

    pub fn row(&self, curve: Curve, teacher_m: Option<usize>, m: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.key() == (curve, teacher_m, m))
    }

    pub fn all_failed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| !r.is_ok())
    }
}

/// Teacher split (possibly with noisy labels), unlabeled student pool, and
/// clean test split.
#[derive(Debug, Clone)]
pub struct Splits {
    pub teacher: LabeledDataset,
    pub student: UnlabeledPool,
    pub test: LabeledDataset,
}

fn derive_seed(seed: u64, tag: &str) -> u64 {
    rng::stream(seed, tag, 0).next_u64()
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_splits(cfg: &SweepConfig) -> Result<Splits> {
    let seeds = cfg.seeds;
    let (teacher, student, test) = match &cfg.data {
        DataSpec::Gaussian {
            d,
            mu,
            n_teacher,
            n_student,
            n_test,
        } => (
            gen_gaussian_binary(
                *n_teacher,
                *d,
                *mu,
                derive_seed(seeds.data, "sweep/teacher"),
            )?,
            gen_unlabeled(
                *n_student,
                *d,
                *mu,
                derive_seed(seeds.data, "sweep/student"),
            )?,
            gen_gaussian_binary(*n_test, *d, *mu, derive_seed(seeds.data, "sweep/test"))?,
        ),
        DataSpec::Idx {
            images,
            labels,
            binarize: pair,
            fractions,
        } => {
            let ds = load_idx_dataset(
                &parse_idx(&read_file(images)?)?,
                &parse_idx(&read_file(labels)?)?,
            )?;
            split_three(ds, *pair, fractions, seeds.data)?
        }
        DataSpec::Csv {
            path,
            classes,
            binarize: pair,
            fractions,
        } => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let ds = read_labeled_csv(BufReader::new(file), *classes)?;
            split_three(ds, *pair, fractions, seeds.data)?
        }
    };
    let teacher = if cfg.label_noise > 0.0 {
        inject_label_noise(&teacher, cfg.label_noise, seeds.noise)?
    } else {
        teacher
    };
    Ok(Splits {
        teacher,
        student,
        test,
    })
}

fn split_three(
    ds: LabeledDataset,
    pair: Option<[usize; 2]>,
    fractions: &[f64; 3],
    seed: u64,
) -> Result<(LabeledDataset, UnlabeledPool, LabeledDataset)> {
    let ds = match pair {
        Some([a, b]) => binarize(&ds, a, b)?,
        None => ds,
    };
    let mut parts = split(&ds, fractions, seed)?.into_iter();
    let (t, s, e) = (
        parts.next().unwrap(),
        parts.next().unwrap(),
        parts.next().unwrap(),
    );
    Ok((t, s.to_pool(), e))
}

/// Shared evaluation inputs for the test split.
struct TestData<'a> {
    x: MatRef<'a, f64>,
    labels: &'a [usize],
    one_hot: Mat<f64>,
    truth: Option<Mat<f64>>,
}

#[derive(Debug, Clone, Copy)]
struct Metrics {
    test_err: f64,
    train_err: f64,
    test_xent: f64,
    train_xent: f64,
    entropy: f64,
    mae: [Option<f64>; 4],
}

fn evaluate(
    model: &Model,
    phi_train: MatRef<'_, f64>,
    train_targets: MatRef<'_, f64>,
    train_labels: &[usize],
    test: &TestData<'_>,
) -> Result<Metrics> {
    let p_train = model.predict_prob_from_features(phi_train)?;
    let p_test = model.predict_prob(test.x)?;
    let mut mae = [None; 4];
    if let (Some(truth), 2) = (&test.truth, model.classes()) {
        for (slot, &a) in mae.iter_mut().zip(&MAE_ALPHAS) {
            *slot = Some(teacher_approx_from_probs(
                p_test.as_ref(),
                truth.as_ref(),
                a,
                ApproxVariant::BinaryMae,
            )?);
        }
    }
    Ok(Metrics {
        test_err: zero_one_from_predictions(&predictions_from_probs(p_test.as_ref()), test.labels)?,
        train_err: zero_one_from_predictions(
            &predictions_from_probs(p_train.as_ref()),
            train_labels,
        )?,
        test_xent: cross_entropy_from_probs(p_test.as_ref(), test.one_hot.as_ref())?,
        train_xent: cross_entropy_from_probs(p_train.as_ref(), train_targets)?,
        entropy: avg_entropy_from_probs(p_test.as_ref()),
        mae,
    })
}

fn fit_head(
    head: HeadKind,
    map: &FeatureMap,
    phi: MatRef<'_, f64>,
    targets: MatRef<'_, f64>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Model> {
    match head {
        HeadKind::Ridge => {
            fit_ridge_features(map, phi, ridge_targets(targets).as_ref(), cfg.lambda)
        }
        HeadKind::Logistic => Ok(fit_logistic_features(map, phi, targets, cfg, seed)?.model),
    }
}

struct CellSpec<'a> {
    m: usize,
    curve: Curve,
    teacher_m: Option<usize>,
    map: &'a FeatureMap,
    x_train: MatRef<'a, f64>,
    targets: MatRef<'a, f64>,
    labels: &'a [usize],
    cfg: &'a TrainConfig,
    seed: u64,
}

fn run_cell(head: HeadKind, spec: &CellSpec<'_>, test: &TestData<'_>) -> (SweepRow, Option<Model>) {
    let start = Instant::now();
    let outcome = (|| {
        let map = spec.map.prefix(spec.m)?;
        let phi = featurize(&map, spec.x_train)?;
        let model = fit_head(head, &map, phi.as_ref(), spec.targets, spec.cfg, spec.seed)?;
        let metrics = evaluate(&model, phi.as_ref(), spec.targets, spec.labels, test)?;
        Ok::<_, Error>((model, metrics))
    })();
    match outcome {
        Ok((model, k)) => {
            let row = SweepRow {
                m: spec.m,
                curve: spec.curve,
                teacher_m: spec.teacher_m,
                test_err: Some(k.test_err),
                train_err: Some(k.train_err),
                test_xent: Some(k.test_xent),
                train_xent: Some(k.train_xent),
                entropy: Some(k.entropy),
                mae_alpha_1: k.mae[0],
                mae_alpha_2: k.mae[1],
                mae_alpha_5: k.mae[2],
                mae_alpha_inf: k.mae[3],
                status: CellStatus::Ok,
                message: None,
                wall_time_secs: start.elapsed().as_secs_f64(),
            };
            (row, Some(model))
        }
        Err(e) => {
            let mut row = SweepRow::failed(spec.m, spec.curve, spec.teacher_m, e.to_string());
            row.wall_time_secs = start.elapsed().as_secs_f64();
            (row, None)
        }
    }
}

/// Run a full sweep from its config.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let splits = load_splits(cfg)?;
    run_sweep_on(cfg, &splits)
}

/// [`run_sweep`] on already-loaded splits.
pub fn run_sweep_on(cfg: &SweepConfig, splits: &Splits) -> Result<SweepResult> {
    cfg.validate()?;
    let d = splits.teacher.dim();
    if splits.student.dim() != d || splits.test.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: splits.test.dim(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;

    let test = TestData {
        x: splits.test.features().as_ref(),
        labels: splits.test.labels(),
        one_hot: splits.test.one_hot(),
        truth: splits
            .test
            .truth()
            .map(|o| oracle_probs(o, splits.test.features().as_ref())),
    };
    let teacher_map = sample_feature_map(
        *cfg.m_grid.last().unwrap(),
        d,
        cfg.sigma,
        cfg.seeds.teacher_map,
    )?;
    let student_map = sample_feature_map(
        *cfg.student_grid().last().unwrap(),
        d,
        cfg.sigma,
        cfg.seeds.student_map,
    )?;
    let teacher_ms = cfg.teacher_ms();

    let teacher_targets = splits.teacher.one_hot();
    let teacher_specs: Vec<CellSpec<'_>> = cfg
        .m_grid
        .iter()
        .map(|&m| CellSpec {
            m,
            curve: Curve::Teacher,
            teacher_m: None,
            map: &teacher_map,
            x_train: splits.teacher.features().as_ref(),
            targets: teacher_targets.as_ref(),
            labels: splits.teacher.labels(),
            cfg: &cfg.train,
            seed: cfg.seeds.teacher_map,
        })
        .collect();
    let teacher_out: Vec<(SweepRow, Option<Model>)> = pool.install(|| {
        teacher_specs
            .par_iter()
            .map(|s| run_cell(cfg.head, s, &test))
            .collect()
    });

    // label the pool once per teacher, soft first, hard derived from it
    let mut distilled: Vec<(
        usize,
        LabelMode,
        std::result::Result<(DistilledDataset, Vec<usize>), String>,
    )> = Vec::new();
    for &t_m in &teacher_ms {
        let idx = cfg.m_grid.iter().position(|&m| m == t_m).unwrap();
        let labeled = match &teacher_out[idx].1 {
            Some(teacher) => teacher
                .predict_prob(splits.student.features().as_ref())
                .map_err(|e| e.to_string()),
            None => Err(format!("teacher at m = {t_m} failed")),
        };
        for &mode in &cfg.label_modes {
            let ds = labeled.clone().and_then(|probs| {
                distilled_from_probs(
                    splits.student.features().clone(),
                    probs,
                    mode,
                    format!("teacher-m{t_m}"),
                )
                .map(|ds| {
                    let labels = ds.hard_labels();
                    (ds, labels)
                })
                .map_err(|e| e.to_string())
            });
            distilled.push((t_m, mode, ds));
        }
    }

    let student_cfg = cfg.student_train_config();
    let mut student_rows = Vec::new();
    let mut student_specs = Vec::new();
    for (t_m, mode, ds) in &distilled {
        for &m in cfg.student_grid() {
            match ds {
                Ok((ds, labels)) => student_specs.push(CellSpec {
                    m,
                    curve: Curve::student(*mode),
                    teacher_m: Some(*t_m),
                    map: &student_map,
                    x_train: ds.features().as_ref(),
                    targets: ds.targets().as_ref(),
                    labels,
                    cfg: student_cfg,
                    seed: cfg.seeds.student_map,
                }),
                Err(msg) => student_rows.push(SweepRow::failed(
                    m,
                    Curve::student(*mode),
                    Some(*t_m),
                    msg.clone(),
                )),
            }
        }
    }
    let trained: Vec<SweepRow> = pool.install(|| {
        student_specs
            .par_iter()
            .map(|s| run_cell(cfg.head, s, &test).0)
            .collect()
    });
    student_rows.extend(trained);

    let mut rows: Vec<SweepRow> = teacher_out.into_iter().map(|(r, _)| r).collect();
    let largest = rows
        .last()
        .filter(|r| r.is_ok())
        .map(|r| r.train_xent.unwrap() <= r.test_xent.unwrap());
    rows.extend(student_rows);
    rows.sort_by_key(|r| r.key());

    Ok(SweepResult {
        metadata: SweepMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            seeds: cfg.seeds,
            workers: cfg.workers,
            sizes: SplitSizes {
                teacher: splits.teacher.len(),
                student: splits.student.len(),
                test: splits.test.len(),
            },
            entropy_unit: "nats".into(),
            xent_floor: XENT_FLOOR,
            teacher_train_xent_le_test_xent: largest,
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke(head: &str, modes: &str) -> SweepConfig {
        SweepConfig::from_toml(&format!(
            r#"
m_grid = [1, 2]
sigma = 2.0
head = "{head}"
label_modes = {modes}
[train]
lambda = 1e-3
steps = 50
[data]
kind = "gaussian"
d = 3
mu = 0.7
n_teacher = 10
n_student = 10
n_test = 10
"#
        ))
        .unwrap()
    }

    #[test]
    fn smoke_sweep_has_expected_rows() {
        for head in ["ridge", "logistic"] {
            let start = Instant::now();
            let r = run_sweep(&smoke(head, r#"["soft", "hard"]"#)).unwrap();
            assert!(start.elapsed().as_secs_f64() < 1.0);
            assert_eq!(r.rows.len(), 2 * (1 + 2));
            assert!(r.rows.iter().all(|row| row.is_ok()));
            for row in &r.rows {
                for v in [row.test_err, row.train_err] {
                    assert!((0.0..=1.0).contains(&v.unwrap()));
                }
                assert!(row.mae_alpha_inf.is_some());
            }
            let keys: Vec<_> = r.rows.iter().map(|r| r.key()).collect();
            let mut sorted = keys.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(keys, sorted);
        }
    }

    #[test]
    fn teacher_rows_do_not_depend_on_label_modes() {
        let strip = |r: SweepResult| -> Vec<SweepRow> {
            r.rows
                .into_iter()
                .filter(|row| row.curve == Curve::Teacher)
                .map(|mut row| {
                    row.wall_time_secs = 0.0;
                    row
                })
                .collect()
        };
        let a = strip(run_sweep(&smoke("logistic", r#"["soft"]"#)).unwrap());
        let b = strip(run_sweep(&smoke("logistic", r#"["soft", "hard"]"#)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn failed_cells_are_recorded() {
        let mut cfg = smoke("logistic", r#"["soft"]"#);
        cfg.train.learning_rate = Some(1e300);
        cfg.train.lambda = 1.0;
        let r = run_sweep(&cfg).unwrap();
        assert!(r.all_failed());
        assert!(r
            .rows
            .iter()
            .all(|row| row.test_err.is_none() && row.message.is_some()));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut cfg = smoke("ridge", r#"["soft", "hard"]"#);
        let a = run_sweep(&cfg).unwrap();
        cfg.workers = 3;
        let b = run_sweep(&cfg).unwrap();
        let metrics = |r: &SweepResult| {
            r.rows
                .iter()
                .map(|x| (x.key(), x.test_err, x.train_xent))
                .collect::<Vec<_>>()
        };
        assert_eq!(metrics(&a), metrics(&b));
    }
}
