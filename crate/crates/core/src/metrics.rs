//! Confusion counts with Malignant as the positive class.

use thiserror::Error;

use crate::dataset::Label;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no predictions to score")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Metrics {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }

    /// `(TP + TN) / total`, or 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            total => self.correct() as f64 / total as f64,
        }
    }

    pub fn record(&mut self, predicted: Label, actual: Label) {
        match (predicted, actual) {
            (Label::Malignant, Label::Malignant) => self.tp += 1,
            (Label::Malignant, Label::Benign) => self.fp += 1,
            (Label::Benign, Label::Malignant) => self.fn_ += 1,
            (Label::Benign, Label::Benign) => self.tn += 1,
        }
    }
}

pub fn accuracy(predictions: &[Label], labels: &[Label]) -> Result<Metrics, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { predictions: predictions.len(), labels: labels.len() });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut m = Metrics::default();
    for (&p, &a) in predictions.iter().zip(labels) {
        m.record(p, a);
    }
    Ok(m)
}
