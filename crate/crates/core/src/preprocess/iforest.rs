use alloc::vec::Vec;

use super::PreprocessError;
use crate::dataset::{Dataset, Sample};
use crate::rng::{streams, SeededRng};

const EULER_GAMMA: f64 = 0.577_215_664_9;
const EXACT_HARMONIC_LIMIT: usize = 1_000;

fn harmonic(i: usize) -> f64 {
    if i <= EXACT_HARMONIC_LIMIT {
        (1..=i).map(|k| 1.0 / k as f64).sum()
    } else {
        libm::log(i as f64) + EULER_GAMMA
    }
}

/// Average path length of an unsuccessful binary-search-tree lookup over
/// `n` points; normalizes isolation depths.
pub fn avg_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => 2.0 * harmonic(n - 1) - 2.0 * (n - 1) as f64 / n as f64,
    }
}

/// `c(0..=max)` in one pass over the harmonic series.
fn path_length_table(max: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(max + 1);
    let mut h = 0.0;
    for n in 0..=max {
        let value = match n {
            0 | 1 => 0.0,
            2 => 1.0,
            _ if n - 1 > EXACT_HARMONIC_LIMIT => avg_path_length(n),
            _ => 2.0 * h - 2.0 * (n - 1) as f64 / n as f64,
        };
        table.push(value);
        // h becomes H(n) for the next iteration's H(n' - 1).
        if n >= 1 {
            h += 1.0 / n as f64;
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Rows with `x[split_feature] < split_value` go left.
    Internal {
        split_feature: usize,
        split_value: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<TreeNode>,
    height_limit: usize,
}

impl IsolationTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn height_limit(&self) -> usize {
        self.height_limit
    }

    /// Edges from the root to the deepest leaf.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = alloc::vec![(0u32, 0usize)];
        while let Some((idx, d)) = stack.pop() {
            match &self.nodes[idx as usize] {
                TreeNode::Internal { left, right, .. } => {
                    stack.push((*left, d + 1));
                    stack.push((*right, d + 1));
                }
                TreeNode::Leaf { .. } => max = max.max(d),
            }
        }
        max
    }

    /// Index of the reached leaf and the number of edges traversed.
    pub fn route(&self, x: &[f64]) -> (usize, usize) {
        let mut idx = 0usize;
        let mut depth = 0;
        while let TreeNode::Internal { split_feature, split_value, left, right } = &self.nodes[idx] {
            idx = if x[*split_feature] < *split_value { *left } else { *right } as usize;
            depth += 1;
        }
        (idx, depth)
    }

    fn build(data: &Dataset, rows: &mut [usize], height_limit: usize, rng: &mut SeededRng) -> Self {
        let mut tree = Self { nodes: Vec::new(), height_limit };
        tree.grow(data, rows, 0, rng);
        tree
    }

    fn grow(&mut self, data: &Dataset, rows: &mut [usize], depth: usize, rng: &mut SeededRng) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(TreeNode::Leaf { size: rows.len() });
        if depth >= self.height_limit || rows.len() <= 1 {
            return id;
        }
        let mut splittable: Vec<(usize, f64, f64)> = Vec::new();
        for f in 0..data.n_features() {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &r in rows.iter() {
                let v = data.get(r).features[f];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if lo < hi {
                splittable.push((f, lo, hi));
            }
        }
        if splittable.is_empty() {
            return id;
        }
        let (feature, lo, hi) = splittable[rng.below(splittable.len())];
        let value = split_inside(lo, hi, rng);

        let mut boundary = 0;
        for i in 0..rows.len() {
            if data.get(rows[i]).features[feature] < value {
                rows.swap(i, boundary);
                boundary += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(boundary);
        let left = self.grow(data, left_rows, depth + 1, rng);
        let right = self.grow(data, right_rows, depth + 1, rng);
        self.nodes[id as usize] = TreeNode::Internal { split_feature: feature, split_value: value, left, right };
        id
    }
}

/// A value strictly inside `(lo, hi)`; falls back to `hi` when the two are
/// adjacent floats, which still separates them under the `<` routing rule.
fn split_inside(lo: f64, hi: f64, rng: &mut SeededRng) -> f64 {
    for _ in 0..8 {
        let v = lo + rng.uniform() * (hi - lo);
        if v > lo && v < hi {
            return v;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest {
    trees: Vec<IsolationTree>,
    subsample_size: usize,
    n_features: usize,
    seed: u64,
    degenerate: bool,
    path_lengths: Vec<f64>,
}

impl IsolationForest {
    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    pub fn subsample_size(&self) -> usize {
        self.subsample_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// True when every fitted row was identical, so no tree could split.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Mean over trees of the isolation depth `edges + c(leaf size)`.
    pub fn expected_path_length(&self, x: &[f64]) -> Result<f64, PreprocessError> {
        if x.len() != self.n_features {
            return Err(PreprocessError::DimensionMismatch { expected: self.n_features, found: x.len() });
        }
        let total: f64 = self
            .trees
            .iter()
            .map(|t| {
                let (leaf, edges) = t.route(x);
                let TreeNode::Leaf { size } = t.nodes[leaf] else { unreachable!() };
                edges as f64 + self.path_length(size)
            })
            .sum();
        Ok(total / self.trees.len() as f64)
    }

    fn path_length(&self, n: usize) -> f64 {
        self.path_lengths.get(n).copied().unwrap_or_else(|| avg_path_length(n))
    }

    /// `2^(-E[h] / c(psi))`.
    pub fn score_from_depth(&self, expected_depth: f64) -> f64 {
        libm::exp2(-expected_depth / self.path_length(self.subsample_size))
    }

    pub fn score_all(&self, data: &Dataset) -> Result<Vec<f64>, PreprocessError> {
        data.samples().iter().map(|s| anomaly_score(self, s)).collect()
    }
}

/// Fits `n_trees` isolation trees, each on its own seeded subsample of
/// `min(psi, |data|)` rows drawn without replacement.
pub fn fit_isolation_forest(
    data: &Dataset,
    n_trees: usize,
    psi: usize,
    seed: u64,
) -> Result<IsolationForest, PreprocessError> {
    if data.len() < 2 || psi < 2 || n_trees == 0 {
        return Err(PreprocessError::ForestTooSmall);
    }
    let subsample_size = psi.min(data.len());
    let height_limit = libm::ceil(libm::log2(subsample_size as f64)) as usize;
    let first = &data.get(0).features;
    let degenerate = data.samples().iter().all(|s| &s.features == first);

    let mut trees = Vec::with_capacity(n_trees);
    let mut rows: Vec<usize> = (0..data.len()).collect();
    for t in 0..n_trees {
        let mut rng = SeededRng::split(seed, streams::ISOLATION_FOREST, t as u64);
        for i in 0..subsample_size {
            let j = i + rng.below(rows.len() - i);
            rows.swap(i, j);
        }
        let mut sub = rows[..subsample_size].to_vec();
        trees.push(IsolationTree::build(data, &mut sub, height_limit, &mut rng));
    }
    Ok(IsolationForest {
        trees,
        subsample_size,
        n_features: data.n_features(),
        seed,
        degenerate,
        path_lengths: path_length_table(subsample_size),
    })
}

pub fn anomaly_score(forest: &IsolationForest, x: &Sample) -> Result<f64, PreprocessError> {
    let depth = forest.expected_path_length(&x.features)?;
    Ok(forest.score_from_depth(depth))
}

/// `ceil(contamination * n)`, treating products within 1e-9 of an integer as
/// that integer so e.g. `0.1 * 40_000` removes exactly 4,000 rows.
pub fn removal_count(n: usize, contamination: f64) -> usize {
    let raw = contamination * n as f64;
    let nearest = libm::round(raw);
    if libm::fabs(raw - nearest) < 1e-9 {
        nearest as usize
    } else {
        libm::ceil(raw) as usize
    }
}

/// Drops the `ceil(contamination * n)` highest-scoring rows (lower index
/// first on equal scores) and keeps the rest in order.
pub fn remove_outliers(
    data: &Dataset,
    forest: &IsolationForest,
    contamination: f64,
) -> Result<Dataset, PreprocessError> {
    if !(contamination > 0.0 && contamination < 1.0) {
        return Err(PreprocessError::BadContamination(contamination));
    }
    if data.is_empty() || contamination >= 1.0 - 1.0 / data.len() as f64 {
        return Err(PreprocessError::AllRemoved);
    }
    let scores = forest.score_all(data)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut removed = alloc::vec![false; data.len()];
    for &r in &order[..removal_count(data.len(), contamination)] {
        removed[r] = true;
    }
    let kept: Vec<usize> = (0..data.len()).filter(|&r| !removed[r]).collect();
    Ok(data.select(&kept))
}
