//! Gradient-boosted regression trees for binary classification.
//!
//! Logistic loss, residual-fitted trees with exact greedy splits, and Newton
//! leaf values `sum(r) / (sum(p(1-p)) + lambda)`. Malignant is the positive
//! class; a probability of exactly 0.5 predicts Malignant.

mod train;
mod tune;

pub use train::{fit, fit_on_features};
pub use tune::{default_grid, stratified_folds, tune, TuneResult};

use alloc::vec::Vec;

use thiserror::Error;

use crate::dataset::{Dataset, Label, Sample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbdtError {
    #[error("training set is empty")]
    EmptyTrain,
    #[error("training set holds a single class")]
    SingleClass,
    #[error("invalid parameter: {0}")]
    InvalidParams(&'static str),
    #[error("sample has {found} features, model needs at least {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature subset is empty or out of range")]
    BadSubset,
    #[error("tuning grid is empty")]
    EmptyGrid,
    #[error("{folds} folds need at least {folds} rows of each class")]
    TooFewForFolds { folds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub l2_leaf_reg: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self { n_trees: 200, learning_rate: 0.1, max_depth: 4, min_samples_leaf: 1, l2_leaf_reg: 1.0 }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<(), GbdtError> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GbdtError::InvalidParams("learning_rate must lie in (0, 1]"));
        }
        if self.max_depth == 0 {
            return Err(GbdtError::InvalidParams("max_depth must be positive"));
        }
        if self.min_samples_leaf == 0 {
            return Err(GbdtError::InvalidParams("min_samples_leaf must be positive"));
        }
        if !self.l2_leaf_reg.is_finite() || self.l2_leaf_reg < 0.0 {
            return Err(GbdtError::InvalidParams("l2_leaf_reg must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Internal {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Internal { feature, threshold, left, right } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right } as usize;
                }
                Node::Leaf { value } => return *value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = alloc::vec![(0u32, 0usize)];
        while let Some((idx, d)) = stack.pop() {
            match &self.nodes[idx as usize] {
                Node::Internal { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
                Node::Leaf { .. } => max = max.max(d),
            }
        }
        max
    }

    fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Internal { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-z))
}

/// An additive tree ensemble; tree feature indices address the original
/// columns, `feature_subset` records which columns training could use.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    pub feature_subset: Option<Vec<usize>>,
}

impl GbdtModel {
    /// Smallest sample length this model can score.
    pub fn required_features(&self) -> usize {
        let from_trees = self.trees.iter().filter_map(|t| t.max_feature()).max().map_or(0, |f| f + 1);
        let from_subset = self.feature_subset.as_ref().and_then(|s| s.iter().max()).map_or(0, |f| f + 1);
        from_trees.max(from_subset)
    }

    fn check(&self, x: &[f64]) -> Result<(), GbdtError> {
        let expected = self.required_features();
        if x.len() < expected {
            return Err(GbdtError::DimensionMismatch { expected, found: x.len() });
        }
        Ok(())
    }

    /// `base_score + learning_rate * sum(tree(x))` over the first `n_trees` trees.
    pub fn margin_prefix(&self, x: &[f64], n_trees: usize) -> f64 {
        let sum: f64 = self.trees.iter().take(n_trees).map(|t| t.predict(x)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn margin(&self, x: &[f64]) -> Result<f64, GbdtError> {
        self.check(x)?;
        Ok(self.margin_prefix(x, self.trees.len()))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, GbdtError> {
        self.margin(x).map(sigmoid)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label, GbdtError> {
        self.predict_proba(x).map(label_for)
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<Label>, GbdtError> {
        data.samples().iter().map(|s| self.predict(&s.features)).collect()
    }

    /// Mean logistic loss over `data`.
    pub fn log_loss(&self, data: &Dataset) -> Result<f64, GbdtError> {
        let mut total = 0.0;
        for s in data.samples() {
            total += logistic_loss(self.margin(&s.features)?, s);
        }
        Ok(total / data.len() as f64)
    }
}

pub fn label_for(probability: f64) -> Label {
    if probability >= 0.5 {
        Label::Malignant
    } else {
        Label::Benign
    }
}

/// Numerically stable `-[y ln p + (1-y) ln(1-p)]` with `p = sigmoid(margin)`.
fn logistic_loss(margin: f64, sample: &Sample) -> f64 {
    let y = sample.label.target();
    let softplus = if margin > 0.0 { margin + libm::log1p(libm::exp(-margin)) } else { libm::log1p(libm::exp(margin)) };
    softplus - y * margin
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn sigmoid_zero_is_half() {
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn threshold_rule() {
        assert_eq!(label_for(0.5), Label::Malignant);
        assert_eq!(label_for(0.49), Label::Benign);
    }

    #[test]
    fn sigmoid_is_increasing() {
        let mut prev = 0.0;
        for i in -300..300 {
            let p = sigmoid(i as f64 / 20.0);
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn dimension_mismatch() {
        let model = GbdtModel {
            base_score: 0.0,
            learning_rate: 0.1,
            trees: vec![RegressionTree {
                nodes: vec![
                    Node::Internal { feature: 3, threshold: 0.0, left: 1, right: 2 },
                    Node::Leaf { value: -1.0 },
                    Node::Leaf { value: 1.0 },
                ],
            }],
            feature_subset: None,
        };
        assert_eq!(model.predict_proba(&[0.0, 0.0]), Err(GbdtError::DimensionMismatch { expected: 4, found: 2 }));
        assert!(model.predict_proba(&[0.0; 4]).is_ok());
    }

    #[test]
    fn params_validated() {
        assert!(GbdtParams::default().validate().is_ok());
        assert!(GbdtParams { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(GbdtParams { learning_rate: 1.5, ..Default::default() }.validate().is_err());
        assert!(GbdtParams { max_depth: 0, ..Default::default() }.validate().is_err());
        assert!(GbdtParams { l2_leaf_reg: -1.0, ..Default::default() }.validate().is_err());
    }
}
