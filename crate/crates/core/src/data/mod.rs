//! Datasets: generation, ingestion, binarization, label corruption and splits.

mod csv_io;
mod gaussian;
mod idx;

use std::fmt;
use std::sync::Arc;

use faer::{Mat, MatRef};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

pub use csv_io::{read_labeled_csv, write_labeled_csv};
pub use gaussian::{gen_gaussian_binary, gen_unlabeled, GaussianMixtureOracle};
pub use idx::{load_idx_dataset, parse_idx, IdxTensor};

/// Ground-truth conditional class probabilities `x -> p*(x)`.
pub trait ProbabilityOracle: Send + Sync + fmt::Debug {
    fn classes(&self) -> usize;

    /// Simplex vector of length [`classes`](Self::classes).
    fn probs(&self, x: &[f64]) -> Vec<f64>;
}

/// Shared handle to an oracle; datasets and their splits point at the same one.
pub type SharedOracle = Arc<dyn ProbabilityOracle>;

/// Feature rows with integer labels in `[0, classes)`.
#[derive(Clone)]
pub struct LabeledDataset {
    features: Mat<f64>,
    labels: Vec<usize>,
    classes: usize,
    truth: Option<SharedOracle>,
}

impl fmt::Debug for LabeledDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LabeledDataset")
            .field("n", &self.len())
            .field("d", &self.dim())
            .field("classes", &self.classes)
            .field("truth", &self.truth)
            .finish()
    }
}

fn check_finite(features: &Mat<f64>) -> Result<()> {
    for j in 0..features.ncols() {
        for i in 0..features.nrows() {
            if !features[(i, j)].is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite feature at row {i}, column {j}"
                )));
            }
        }
    }
    Ok(())
}

impl LabeledDataset {
    pub fn new(features: Mat<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid(format!(
                "class count must be >= 2, got {classes}"
            )));
        }
        if labels.is_empty() {
            return Err(Error::EmptyDataset("construction"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: features.nrows(),
            });
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
            return Err(Error::invalid(format!(
                "label {y} at row {i} is not below {classes}"
            )));
        }
        check_finite(&features)?;
        Ok(Self {
            features,
            labels,
            classes,
            truth: None,
        })
    }

    /// Attach a ground-truth oracle. Its class count must match.
    pub fn with_truth(mut self, truth: SharedOracle) -> Result<Self> {
        if truth.classes() != self.classes {
            return Err(Error::DimensionMismatch {
                expected: self.classes,
                found: truth.classes(),
            });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn features(&self) -> &Mat<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn truth(&self) -> Option<&SharedOracle> {
        self.truth.as_ref()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        row_of(&self.features, i)
    }

    /// Rows at `indices`, in that order. Keeps the oracle.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset("row selection"));
        }
        let features = select_rows(self.features.as_ref(), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(Self {
            features,
            labels,
            classes: self.classes,
            truth: self.truth.clone(),
        })
    }

    /// Drop the labels, keeping the instances as an unlabeled pool.
    pub fn to_pool(&self) -> UnlabeledPool {
        UnlabeledPool {
            features: self.features.clone(),
        }
    }

    /// One-hot encoding of the labels as an `n x classes` matrix.
    pub fn one_hot(&self) -> Mat<f64> {
        Mat::from_fn(self.len(), self.classes, |i, j| {
            if self.labels[i] == j {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Instances without labels.
#[derive(Debug, Clone)]
pub struct UnlabeledPool {
    features: Mat<f64>,
}

impl UnlabeledPool {
    pub fn new(features: Mat<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset("construction"));
        }
        check_finite(&features)?;
        Ok(Self { features })
    }

    pub fn features(&self) -> &Mat<f64> {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

pub(crate) fn row_of(m: &Mat<f64>, i: usize) -> Vec<f64> {
    (0..m.ncols()).map(|j| m[(i, j)]).collect()
}

pub(crate) fn select_rows(m: MatRef<'_, f64>, indices: &[usize]) -> Mat<f64> {
    Mat::from_fn(indices.len(), m.ncols(), |r, j| m[(indices[r], j)])
}

/// Keep rows labeled `class_a` or `class_b`, relabeling them to 0 and 1.
pub fn binarize(ds: &LabeledDataset, class_a: usize, class_b: usize) -> Result<LabeledDataset> {
    if class_a == class_b {
        return Err(Error::invalid(format!(
            "binarize needs two distinct classes, got {class_a} twice"
        )));
    }
    if class_a >= ds.classes || class_b >= ds.classes {
        return Err(Error::invalid(format!(
            "classes ({class_a}, {class_b}) out of range for {} classes",
            ds.classes
        )));
    }
    let keep: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.labels[i] == class_a || ds.labels[i] == class_b)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyDataset("binarize"));
    }
    let features = select_rows(ds.features.as_ref(), &keep);
    let labels = keep
        .iter()
        .map(|&i| usize::from(ds.labels[i] == class_b))
        .collect();
    // The source oracle (if any) describes the multiclass problem, not this one.
    LabeledDataset::new(features, labels, 2)
}

/// Flip each label with probability `rho` to a uniformly chosen different class.
/// The returned copy carries no oracle.
pub fn inject_label_noise(ds: &LabeledDataset, rho: f64, seed: u64) -> Result<LabeledDataset> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!(
            "noise rate must be in [0, 1], got {rho}"
        )));
    }
    let mut rng = rng::stream(seed, "inject_label_noise", 0);
    let c = ds.classes;
    let labels = ds
        .labels
        .iter()
        .map(|&y| {
            if rng.random::<f64>() < rho {
                let other = rng.random_range(0..c - 1);
                if other >= y {
                    other + 1
                } else {
                    other
                }
            } else {
                y
            }
        })
        .collect();
    Ok(LabeledDataset {
        features: ds.features.clone(),
        labels,
        classes: c,
        truth: None,
    })
}

/// Random disjoint partition with sizes `floor(f_i * n)`, the last part
/// taking whatever remains.
pub fn split(ds: &LabeledDataset, fractions: &[f64], seed: u64) -> Result<Vec<LabeledDataset>> {
    let parts = split_indices(ds.len(), fractions, seed)?;
    parts.iter().map(|idx| ds.select(idx)).collect()
}

/// Index sets behind [`split`].
pub fn split_indices(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.is_empty() {
        return Err(Error::invalid("split needs at least one fraction"));
    }
    if let Some(f) = fractions.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Error::invalid(format!(
            "split fractions must be positive, got {f}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split fractions sum to {total}, not 1"
        )));
    }
    let mut sizes: Vec<usize> = fractions
        .iter()
        .map(|f| (f * n as f64).floor() as usize)
        .collect();
    let assigned: usize = sizes[..sizes.len() - 1].iter().sum();
    *sizes.last_mut().unwrap() = n.saturating_sub(assigned);
    if let Some(index) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptySplit {
            index,
            n,
            fraction: fractions[index],
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "split", 0));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        parts.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(parts)
}
