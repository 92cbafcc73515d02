//! Samples, datasets and the seeded three-way federated partition.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::rng::{streams, SeededRng};

/// WDBC column names in file order.
pub const WDBC_FEATURE_NAMES: [&str; 30] = [
    "radius_mean",
    "texture_mean",
    "perimeter_mean",
    "area_mean",
    "smoothness_mean",
    "compactness_mean",
    "concavity_mean",
    "concave points_mean",
    "symmetry_mean",
    "fractal_dimension_mean",
    "radius_se",
    "texture_se",
    "perimeter_se",
    "area_se",
    "smoothness_se",
    "compactness_se",
    "concavity_se",
    "concave points_se",
    "symmetry_se",
    "fractal_dimension_se",
    "radius_worst",
    "texture_worst",
    "perimeter_worst",
    "area_worst",
    "smoothness_worst",
    "compactness_worst",
    "concavity_worst",
    "concave points_worst",
    "symmetry_worst",
    "fractal_dimension_worst",
];

/// Default feature names for a dataset with `n` columns: the WDBC names when
/// `n == 30`, `f0..f{n-1}` otherwise.
pub fn default_feature_names(n: usize) -> Vec<String> {
    if n == WDBC_FEATURE_NAMES.len() {
        WDBC_FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..n).map(|i| format!("f{i}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Benign,
    Malignant,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Benign, Label::Malignant];

    pub fn index(self) -> usize {
        match self {
            Label::Benign => 0,
            Label::Malignant => 1,
        }
    }

    /// Regression target used by boosting: Malignant is the positive class.
    pub fn target(self) -> f64 {
        match self {
            Label::Benign => 0.0,
            Label::Malignant => 1.0,
        }
    }

    pub fn code(self) -> char {
        match self {
            Label::Benign => 'B',
            Label::Malignant => 'M',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "B" => Some(Label::Benign),
            "M" => Some(Label::Malignant),
            _ => None,
        }
    }
}

impl core::fmt::Display for Label {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Label::Benign => f.write_str("Benign"),
            Label::Malignant => f.write_str("Malignant"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
    /// Set on rows produced by SMOTE; carried through every later stage.
    pub synthetic: bool,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        Self { features, label, synthetic: false }
    }

    pub fn synthetic(features: Vec<f64>, label: Label) -> Self {
        Self { features, label, synthetic: true }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("row {row}: expected {expected} features, found {found}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("row {row}: non-finite feature value")]
    NonFinite { row: usize },
    #[error("{names} feature names for {features} features")]
    NamesMismatch { names: usize, features: usize },
    #[error("dataset too small to partition: {0}")]
    TooSmall(String),
}

/// An immutable collection of samples sharing one dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, feature_names: Vec<String>) -> Result<Self, DatasetError> {
        let expected = feature_names.len();
        for (row, s) in samples.iter().enumerate() {
            if s.features.len() != expected {
                if row == 0 {
                    return Err(DatasetError::NamesMismatch { names: expected, features: s.features.len() });
                }
                return Err(DatasetError::DimensionMismatch { row, expected, found: s.features.len() });
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { row });
            }
        }
        Ok(Self { samples, feature_names })
    }

    /// Builds a dataset with [`default_feature_names`].
    pub fn with_default_names(samples: Vec<Sample>, n_features: usize) -> Result<Self, DatasetError> {
        Self::new(samples, default_feature_names(n_features))
    }

    pub fn empty_like(&self) -> Self {
        Self { samples: Vec::new(), feature_names: self.feature_names.clone() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn get(&self, row: usize) -> &Sample {
        &self.samples[row]
    }

    /// `[benign, malignant]` counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for s in &self.samples {
            counts[s.label.index()] += 1;
        }
        counts
    }

    pub fn has_both_classes(&self) -> bool {
        let [b, m] = self.class_counts();
        b > 0 && m > 0
    }

    pub fn synthetic_count(&self) -> usize {
        self.samples.iter().filter(|s| s.synthetic).count()
    }

    /// Row indices of one class, in row order.
    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        self.samples.iter().enumerate().filter(|(_, s)| s.label == label).map(|(i, _)| i).collect()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            samples: rows.iter().map(|&r| self.samples[r].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Appends the rows of `other`; both must share feature names.
    pub fn concat(&self, other: &Dataset) -> Result<Self, DatasetError> {
        if other.feature_names != self.feature_names {
            return Err(DatasetError::NamesMismatch { names: self.n_features(), features: other.n_features() });
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Ok(Self { samples, feature_names: self.feature_names.clone() })
    }
}

/// One federation participant's private data.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub train: Dataset,
    pub test: Dataset,
}

pub const EDGE1: usize = 0;
pub const EDGE2: usize = 1;
pub const CENTRAL: usize = 2;
pub const SHARD_NAMES: [&str; 3] = ["Edge-1", "Edge-2", "Central"];

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedSplit {
    /// Edge-1, Edge-2, Central.
    pub shards: [Shard; 3],
    pub seed: u64,
}

/// Per-class test counts for one shard: the shard's test budget
/// `floor(0.2 * n)` is apportioned by largest remainder (Benign wins ties),
/// then every class is given at least one test row.
fn test_allocation(counts: [usize; 2]) -> Result<[usize; 2], DatasetError> {
    let n = counts[0] + counts[1];
    for (c, &count) in counts.iter().enumerate() {
        if count < 2 {
            return Err(DatasetError::TooSmall(format!(
                "a shard holds {count} {} row(s); need at least 2 per class",
                Label::ALL[c]
            )));
        }
    }
    let budget = n / 5;
    let mut alloc = [budget * counts[0] / n, budget * counts[1] / n];
    let rem = [budget * counts[0] % n, budget * counts[1] % n];
    let mut leftover = budget - alloc[0] - alloc[1];
    let order = if rem[1] > rem[0] { [1, 0] } else { [0, 1] };
    for c in order {
        if leftover == 0 {
            break;
        }
        alloc[c] += 1;
        leftover -= 1;
    }
    for c in 0..2 {
        alloc[c] = alloc[c].clamp(1, counts[c] - 1);
    }
    Ok(alloc)
}

/// Seeded, class-stratified three-way split with an 80:20 train/test split
/// inside each shard.
///
/// Each class's rows are shuffled (Benign first, one generator on the
/// partition stream), then all Benign rows followed by all Malignant rows
/// are dealt round-robin with a single counter, so shard sizes and per-class
/// shard counts each differ by at most one.
pub fn partition(data: &Dataset, seed: u64) -> Result<FederatedSplit, DatasetError> {
    let mut rng = SeededRng::new(seed, streams::PARTITION);
    let mut dealt: [[Vec<usize>; 2]; 3] = Default::default();
    let mut counter = 0usize;
    for label in Label::ALL {
        let mut rows = data.indices_of(label);
        rng.shuffle(&mut rows);
        for r in rows {
            dealt[counter % 3][label.index()].push(r);
            counter += 1;
        }
    }

    let mut shards: Vec<Shard> = Vec::with_capacity(3);
    for per_class in &dealt {
        let alloc = test_allocation([per_class[0].len(), per_class[1].len()])?;
        let mut train_rows = Vec::new();
        let mut test_rows = Vec::new();
        for c in 0..2 {
            let (test, train) = per_class[c].split_at(alloc[c]);
            test_rows.extend_from_slice(test);
            train_rows.extend_from_slice(train);
        }
        shards.push(Shard { train: data.select(&train_rows), test: data.select(&test_rows) });
    }
    let mut it = shards.into_iter();
    let shards = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
    Ok(FederatedSplit { shards, seed })
}
