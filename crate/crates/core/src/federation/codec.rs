//! Little-endian model format:
//!
//! ```text
//! "PFD1" | version u16 | base_score f64 | learning_rate f64
//! | subset_len u16 | subset_len x u16
//! | tree_count u32
//! | per tree: node_count u32, per node:
//!     0x00 feature u16 threshold f64 left u32 right u32
//!   | 0x01 value f64
//! ```
//!
//! A model without trees or subset is 28 bytes. A subset length of zero
//! means the model was trained on every column.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::gbdt::{GbdtModel, Node, RegressionTree};

pub const MODEL_MAGIC: [u8; 4] = *b"PFD1";
pub const FORMAT_VERSION: u16 = 1;

const TAG_INTERNAL: u8 = 0;
const TAG_LEAF: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("input ends early")]
    Truncated,
    #[error("tree {0} is not a well-formed binary tree")]
    CorruptTree(usize),
    #[error("non-finite value in model")]
    NonFinite,
    #[error("{0} bytes left after the model")]
    TrailingBytes(usize),
    #[error("invalid {0} field")]
    InvalidField(&'static str),
}

pub fn serialize_model(model: &GbdtModel) -> Vec<u8> {
    let mut out = Vec::new();
    write_model(model, &mut out);
    out
}

pub(crate) fn write_model(model: &GbdtModel, out: &mut Vec<u8>) {
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.base_score.to_le_bytes());
    out.extend_from_slice(&model.learning_rate.to_le_bytes());
    let subset: &[usize] = model.feature_subset.as_deref().unwrap_or(&[]);
    out.extend_from_slice(&u16::try_from(subset.len()).expect("subset fits u16").to_le_bytes());
    for &f in subset {
        out.extend_from_slice(&u16::try_from(f).expect("feature index fits u16").to_le_bytes());
    }
    out.extend_from_slice(&(model.trees.len() as u32).to_le_bytes());
    for tree in &model.trees {
        out.extend_from_slice(&(tree.nodes.len() as u32).to_le_bytes());
        for node in &tree.nodes {
            match node {
                Node::Internal { feature, threshold, left, right } => {
                    out.push(TAG_INTERNAL);
                    out.extend_from_slice(&u16::try_from(*feature).expect("feature index fits u16").to_le_bytes());
                    out.extend_from_slice(&threshold.to_le_bytes());
                    out.extend_from_slice(&left.to_le_bytes());
                    out.extend_from_slice(&right.to_le_bytes());
                }
                Node::Leaf { value } => {
                    out.push(TAG_LEAF);
                    out.extend_from_slice(&value.to_le_bytes());
                }
            }
        }
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, CodecError> {
        self.array().map(u16::from_le_bytes)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, CodecError> {
        self.array().map(u32::from_le_bytes)
    }

    pub(crate) fn u64(&mut self) -> Result<u64, CodecError> {
        self.array().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64, CodecError> {
        let v = f64::from_le_bytes(self.array()?);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CodecError::NonFinite)
        }
    }
}

pub fn deserialize_model(bytes: &[u8]) -> Result<GbdtModel, CodecError> {
    let mut reader = Reader::new(bytes);
    let model = read_model(&mut reader)?;
    match reader.remaining() {
        0 => Ok(model),
        n => Err(CodecError::TrailingBytes(n)),
    }
}

pub(crate) fn read_model(r: &mut Reader<'_>) -> Result<GbdtModel, CodecError> {
    if r.take(4)? != MODEL_MAGIC {
        return Err(CodecError::BadMagic);
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(CodecError::UnsupportedVersion(version));
    }
    let base_score = r.f64()?;
    let learning_rate = r.f64()?;
    let subset_len = r.u16()? as usize;
    let mut subset = Vec::with_capacity(subset_len);
    for _ in 0..subset_len {
        subset.push(r.u16()? as usize);
    }
    let tree_count = r.u32()? as usize;
    // Each tree needs at least 13 bytes (count + one leaf).
    if tree_count > r.remaining() / 13 {
        return Err(CodecError::Truncated);
    }
    let mut trees = Vec::with_capacity(tree_count);
    for t in 0..tree_count {
        let node_count = r.u32()? as usize;
        if node_count == 0 {
            return Err(CodecError::CorruptTree(t));
        }
        if node_count > r.remaining() / 9 {
            return Err(CodecError::Truncated);
        }
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            let node = match r.u8()? {
                TAG_INTERNAL => {
                    let feature = r.u16()? as usize;
                    let threshold = r.f64()?;
                    let left = r.u32()?;
                    let right = r.u32()?;
                    if !subset.is_empty() && !subset.contains(&feature) {
                        return Err(CodecError::CorruptTree(t));
                    }
                    Node::Internal { feature, threshold, left, right }
                }
                TAG_LEAF => Node::Leaf { value: r.f64()? },
                _ => return Err(CodecError::CorruptTree(t)),
            };
            nodes.push(node);
        }
        check_tree(&nodes).map_err(|_| CodecError::CorruptTree(t))?;
        trees.push(RegressionTree { nodes });
    }
    let feature_subset = if subset.is_empty() { None } else { Some(subset) };
    Ok(GbdtModel { base_score, learning_rate, trees, feature_subset })
}

/// Every node must be reachable from node 0 exactly once.
fn check_tree(nodes: &[Node]) -> Result<(), ()> {
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![0usize];
    while let Some(idx) = stack.pop() {
        if idx >= nodes.len() || seen[idx] {
            return Err(());
        }
        seen[idx] = true;
        if let Node::Internal { left, right, .. } = nodes[idx] {
            stack.push(left as usize);
            stack.push(right as usize);
        }
    }
    if seen.iter().all(|s| *s) {
        Ok(())
    } else {
        Err(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_leaf() -> GbdtModel {
        GbdtModel {
            base_score: 0.25,
            learning_rate: 0.1,
            trees: vec![RegressionTree { nodes: vec![Node::Leaf { value: 1.0 }] }],
            feature_subset: None,
        }
    }

    fn stump() -> GbdtModel {
        GbdtModel {
            base_score: -0.5,
            learning_rate: 0.3,
            trees: vec![RegressionTree {
                nodes: vec![
                    Node::Internal { feature: 2, threshold: 1.5, left: 1, right: 2 },
                    Node::Leaf { value: -1.0 },
                    Node::Leaf { value: 2.0 },
                ],
            }],
            feature_subset: Some(vec![2, 4]),
        }
    }

    #[test]
    fn constant_model_is_28_bytes() {
        let model = GbdtModel { base_score: 0.0, learning_rate: 0.1, trees: vec![], feature_subset: None };
        let bytes = serialize_model(&model);
        assert_eq!(bytes.len(), 28);
        assert_eq!(&bytes[24..], &[0, 0, 0, 0]);
    }

    #[test]
    fn leaf_layout() {
        let bytes = serialize_model(&one_leaf());
        let tail = &bytes[bytes.len() - 9..];
        assert_eq!(tail[0], 0x01);
        assert_eq!(&tail[1..], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[..4], b"PFD1");
        assert_eq!(&bytes[4..6], &[1, 0]);
    }

    #[test]
    fn roundtrip() {
        for model in [one_leaf(), stump()] {
            let bytes = serialize_model(&model);
            let back = deserialize_model(&bytes).unwrap();
            assert_eq!(back, model);
            assert_eq!(serialize_model(&back), bytes);
        }
    }

    #[test]
    fn bad_magic() {
        let mut bytes = serialize_model(&stump());
        bytes[..4].copy_from_slice(b"XXXX");
        assert_eq!(deserialize_model(&bytes), Err(CodecError::BadMagic));
    }

    #[test]
    fn bad_version() {
        let mut bytes = serialize_model(&stump());
        bytes[4] = 2;
        assert_eq!(deserialize_model(&bytes), Err(CodecError::UnsupportedVersion(2)));
    }

    #[test]
    fn truncated_by_one() {
        let bytes = serialize_model(&stump());
        assert_eq!(deserialize_model(&bytes[..bytes.len() - 1]), Err(CodecError::Truncated));
    }

    #[test]
    fn trailing_bytes() {
        let mut bytes = serialize_model(&stump());
        bytes.push(0);
        assert_eq!(deserialize_model(&bytes), Err(CodecError::TrailingBytes(1)));
    }

    fn with_children(left: u32, right: u32) -> GbdtModel {
        GbdtModel {
            trees: vec![RegressionTree {
                nodes: vec![
                    Node::Internal { feature: 0, threshold: 0.0, left, right },
                    Node::Leaf { value: 0.0 },
                    Node::Leaf { value: 0.0 },
                ],
            }],
            feature_subset: None,
            ..one_leaf()
        }
    }

    #[test]
    fn out_of_range_child() {
        let bytes = serialize_model(&with_children(1, 7));
        assert_eq!(deserialize_model(&bytes), Err(CodecError::CorruptTree(0)));
    }

    #[test]
    fn cycle_and_shared_child() {
        assert_eq!(deserialize_model(&serialize_model(&with_children(0, 1))), Err(CodecError::CorruptTree(0)));
        assert_eq!(deserialize_model(&serialize_model(&with_children(1, 1))), Err(CodecError::CorruptTree(0)));
    }

    #[test]
    fn feature_outside_subset() {
        let mut model = stump();
        model.feature_subset = Some(vec![0, 1]);
        assert_eq!(deserialize_model(&serialize_model(&model)), Err(CodecError::CorruptTree(0)));
    }
}
