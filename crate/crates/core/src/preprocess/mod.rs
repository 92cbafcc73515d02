//! Dataset enrichment ahead of federation: per-class SMOTE expansion followed
//! by isolation-forest outlier removal.

mod iforest;
mod smote;

pub use iforest::{
    anomaly_score, avg_path_length, fit_isolation_forest, removal_count, remove_outliers, IsolationForest,
    IsolationTree, TreeNode,
};
pub use smote::{knn_same_class, smote_expand, smote_expand_with_parents, SmoteConfig};

use thiserror::Error;

use crate::dataset::Label;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("class {0} has too few samples for the requested neighbours")]
    ClassTooSmall(Label),
    #[error("target of {target} per class is below the current {label} count {current}")]
    TargetBelowCurrent { label: Label, target: usize, current: usize },
    #[error("k_neighbors must be positive")]
    ZeroNeighbors,
    #[error("not enough same-class neighbours")]
    NotEnoughNeighbors,
    #[error("row index {0} out of range")]
    RowOutOfRange(usize),
    #[error("isolation forest needs at least 2 rows, 1 tree and a subsample of 2")]
    ForestTooSmall,
    #[error("sample has {found} features, forest expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("contamination {0} must lie in (0, 1)")]
    BadContamination(f64),
    #[error("contamination would remove every row")]
    AllRemoved,
}
