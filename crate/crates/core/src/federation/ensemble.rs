use alloc::vec::Vec;

use super::codec::{read_model, write_model, CodecError, Reader};
use crate::dataset::{Dataset, Label};
use crate::gbdt::{label_for, GbdtError, GbdtModel};

/// Equal-weight soft vote over member models.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    members: Vec<GbdtModel>,
}

impl EnsembleModel {
    /// `None` when `members` is empty.
    pub fn new(members: Vec<GbdtModel>) -> Option<Self> {
        if members.is_empty() {
            None
        } else {
            Some(Self { members })
        }
    }

    pub fn members(&self) -> &[GbdtModel] {
        &self.members
    }

    /// Mean of the member probabilities.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, GbdtError> {
        let mut total = 0.0;
        for m in &self.members {
            total += m.predict_proba(x)?;
        }
        Ok(total / self.members.len() as f64)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label, GbdtError> {
        self.predict_proba(x).map(label_for)
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<Label>, GbdtError> {
        data.samples().iter().map(|s| self.predict(&s.features)).collect()
    }
}

/// `member_count u16 LE`, then per member `len u32 LE` + model bytes.
pub fn serialize_ensemble(ensemble: &EnsembleModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(ensemble.members.len() as u16).to_le_bytes());
    for m in &ensemble.members {
        let start = out.len();
        out.extend_from_slice(&[0; 4]);
        write_model(m, &mut out);
        let len = (out.len() - start - 4) as u32;
        out[start..start + 4].copy_from_slice(&len.to_le_bytes());
    }
    out
}

pub fn deserialize_ensemble(bytes: &[u8]) -> Result<EnsembleModel, CodecError> {
    let mut r = Reader::new(bytes);
    let count = r.u16()? as usize;
    if count == 0 {
        return Err(CodecError::InvalidField("member count"));
    }
    let mut members = Vec::with_capacity(count.min(r.remaining() / 4));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let mut inner = Reader::new(r.take(len)?);
        members.push(read_model(&mut inner)?);
        if inner.remaining() != 0 {
            return Err(CodecError::TrailingBytes(inner.remaining()));
        }
    }
    if r.remaining() != 0 {
        return Err(CodecError::TrailingBytes(r.remaining()));
    }
    Ok(EnsembleModel { members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::{Node, RegressionTree};
    use alloc::vec;

    fn constant(margin: f64) -> GbdtModel {
        GbdtModel {
            base_score: margin,
            learning_rate: 0.1,
            trees: vec![RegressionTree { nodes: vec![Node::Leaf { value: 0.0 }] }],
            feature_subset: None,
        }
    }

    fn logit(p: f64) -> f64 {
        libm::log(p / (1.0 - p))
    }

    #[test]
    fn soft_vote_mean() {
        let e = EnsembleModel::new(vec![constant(logit(0.9)), constant(logit(0.8)), constant(logit(0.1))]).unwrap();
        let p = e.predict_proba(&[]).unwrap();
        assert!((p - 0.6).abs() < 1e-12);
        assert_eq!(e.predict(&[]).unwrap(), Label::Malignant);
    }

    #[test]
    fn single_member_matches() {
        let m = constant(logit(0.3));
        let e = EnsembleModel::new(vec![m.clone()]).unwrap();
        assert_eq!(e.predict_proba(&[]).unwrap(), m.predict_proba(&[]).unwrap());
    }

    #[test]
    fn empty_rejected() {
        assert!(EnsembleModel::new(vec![]).is_none());
    }

    #[test]
    fn roundtrip() {
        let e = EnsembleModel::new(vec![constant(0.2), constant(-1.0)]).unwrap();
        let bytes = serialize_ensemble(&e);
        let back = deserialize_ensemble(&bytes).unwrap();
        assert_eq!(back, e);
        assert_eq!(serialize_ensemble(&back), bytes);
        assert_eq!(deserialize_ensemble(&bytes[..bytes.len() - 1]), Err(CodecError::Truncated));
    }
}
