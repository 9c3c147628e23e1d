use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distill::LabelMode;
use crate::error::{Error, Result};
use crate::rff::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Ridge,
    Logistic,
}

/// Where the teacher split, student pool and test split come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSpec {
    /// Two-component Gaussian mixture with a known oracle.
    Gaussian {
        d: usize,
        mu: f64,
        n_teacher: usize,
        n_student: usize,
        n_test: usize,
    },
    /// IDX image/label pair, optionally restricted to two classes, split by
    /// `fractions = [teacher, student, test]`.
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        binarize: Option<[usize; 2]>,
        fractions: [f64; 3],
    },
    /// Labeled CSV with header `x0..x{d-1},label`.
    Csv {
        path: PathBuf,
        #[serde(default)]
        classes: Option<usize>,
        #[serde(default)]
        binarize: Option<[usize; 2]>,
        fractions: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub teacher_map: u64,
    pub student_map: u64,
    pub noise: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            data: 0,
            teacher_map: 1,
            student_map: 2,
            noise: 3,
        }
    }
}

/// Everything that determines a sweep's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Teacher complexities, strictly increasing.
    pub m_grid: Vec<usize>,
    /// Student complexities; defaults to `m_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student_m_grid: Option<Vec<usize>>,
    pub sigma: f64,
    pub head: HeadKind,
    #[serde(default)]
    pub train: TrainConfig,
    /// Overrides `train` for students.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student_train: Option<TrainConfig>,
    /// Teachers whose labels train students; defaults to the largest `m_grid` entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_m_for_students: Option<Vec<usize>>,
    #[serde(default = "default_modes")]
    pub label_modes: Vec<LabelMode>,
    /// Fraction of teacher training labels flipped to a different class.
    #[serde(default)]
    pub label_noise: f64,
    pub data: DataSpec,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_modes() -> Vec<LabelMode> {
    vec![LabelMode::Soft]
}

fn default_workers() -> usize {
    1
}

fn strictly_increasing(name: &str, grid: &[usize]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} is empty")));
    }
    if grid[0] == 0 {
        return Err(Error::Config(format!("{name} entries must be positive")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "{name} must be strictly increasing, got {grid:?}"
        )));
    }
    Ok(())
}

fn check_train(name: &str, t: &TrainConfig) -> Result<()> {
    if !(t.lambda.is_finite() && t.lambda >= 0.0) {
        return Err(Error::Config(format!(
            "{name}.lambda must be finite and nonnegative"
        )));
    }
    if let Some(lr) = t.learning_rate {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::Config(format!(
                "{name}.learning_rate must be positive"
            )));
        }
    }
    if let Some(scale) = t.lr_scale {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Config(format!("{name}.lr_scale must be positive")));
        }
    }
    Ok(())
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("sweep config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        strictly_increasing("m_grid", &self.m_grid)?;
        strictly_increasing("student_m_grid", self.student_grid())?;
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        check_train("train", &self.train)?;
        if let Some(t) = &self.student_train {
            check_train("student_train", t)?;
        }
        for t in self.teacher_ms() {
            if !self.m_grid.contains(&t) {
                return Err(Error::Config(format!(
                    "teacher_m_for_students entry {t} is not in m_grid"
                )));
            }
        }
        let mut modes = self.label_modes.clone();
        modes.sort();
        modes.dedup();
        if modes.len() != self.label_modes.len() {
            return Err(Error::Config("label_modes has duplicates".into()));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label_noise must lie in [0, 1], got {}",
                self.label_noise
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        match &self.data {
            DataSpec::Gaussian {
                d,
                mu,
                n_teacher,
                n_student,
                n_test,
            } => {
                if *d == 0 || *n_teacher == 0 || *n_student == 0 || *n_test == 0 {
                    return Err(Error::Config(
                        "gaussian data needs positive d and split sizes".into(),
                    ));
                }
                if !mu.is_finite() {
                    return Err(Error::Config("gaussian mu must be finite".into()));
                }
            }
            DataSpec::Idx { fractions, .. } | DataSpec::Csv { fractions, .. } => {
                let sum: f64 = fractions.iter().sum();
                if fractions.iter().any(|f| !(*f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "fractions must be positive and sum to 1, got {fractions:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn student_grid(&self) -> &[usize] {
        self.student_m_grid.as_deref().unwrap_or(&self.m_grid)
    }

    pub fn teacher_ms(&self) -> Vec<usize> {
        match &self.teacher_m_for_students {
            Some(v) => v.clone(),
            None => self.m_grid.last().copied().into_iter().collect(),
        }
    }

    pub fn student_train_config(&self) -> &TrainConfig {
        self.student_train.as_ref().unwrap_or(&self.train)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("sweep config serializes to JSON");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
m_grid = [1, 2, 4]
sigma = 5.0
head = "ridge"
label_modes = ["soft", "hard"]

[train]
lambda = 1e-4

[data]
kind = "gaussian"
d = 3
mu = 0.5
n_teacher = 10
n_student = 20
n_test = 30
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = SweepConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.student_grid(), &[1, 2, 4]);
        assert_eq!(cfg.teacher_ms(), vec![4]);
        assert_eq!(cfg.workers, 1);
        assert_eq!(cfg.seeds, Seeds::default());
        assert_eq!(cfg.train.steps, 5000);
    }

    #[test]
    fn toml_round_trip_preserves_config_and_hash() {
        let cfg = SweepConfig::from_toml(BASIC).unwrap();
        let again = SweepConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_grids() {
        let unknown = BASIC.replace("sigma = 5.0", "sigma = 5.0\nsigmaa = 1.0");
        assert!(matches!(
            SweepConfig::from_toml(&unknown),
            Err(Error::Config(_))
        ));
        let nested = BASIC.replace("lambda = 1e-4", "lambda = 1e-4\nlamda = 2");
        assert!(SweepConfig::from_toml(&nested).is_err());
        let unsorted = BASIC.replace("[1, 2, 4]", "[1, 4, 2]");
        assert!(SweepConfig::from_toml(&unsorted).is_err());
        let teacher = BASIC.replace(
            "head = \"ridge\"",
            "head = \"ridge\"\nteacher_m_for_students = [3]",
        );
        assert!(SweepConfig::from_toml(&teacher).is_err());
        let noise = BASIC.replace("sigma = 5.0", "sigma = 5.0\nlabel_noise = 1.5");
        assert!(SweepConfig::from_toml(&noise).is_err());
    }

    #[test]
    fn file_data_needs_valid_fractions() {
        let csv = BASIC.replace(
            "kind = \"gaussian\"\nd = 3\nmu = 0.5\nn_teacher = 10\nn_student = 20\nn_test = 30",
            "kind = \"csv\"\npath = \"x.csv\"\nfractions = [0.5, 0.5, 0.5]",
        );
        assert!(SweepConfig::from_toml(&csv).is_err());
        let ok = csv.replace("[0.5, 0.5, 0.5]", "[0.25, 0.5, 0.25]");
        assert!(SweepConfig::from_toml(&ok).is_ok());
    }
}
