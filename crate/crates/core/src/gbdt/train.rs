use alloc::vec;
use alloc::vec::Vec;

use super::{sigmoid, GbdtError, GbdtModel, GbdtParams, Node, RegressionTree};
use crate::dataset::Dataset;

const DONE: u32 = u32::MAX;

/// A split must explain more than this fraction of its node's residual sum
/// of squares; smaller gains are rounding noise on near-pure nodes.
const MIN_RELATIVE_GAIN: f64 = 1e-9;

/// Training rows in canonical order, presorted per used column.
///
/// Rows are sorted by label then by the used feature values, so everything
/// downstream depends on the row multiset only, never on input order.
pub(crate) struct TrainingSet {
    features: Vec<usize>,
    /// Distinct values of each used column, ascending.
    distinct: Vec<Vec<f64>>,
    /// Rows of each used column in ascending value order, with the rank of
    /// their value in `distinct`.
    sorted: Vec<Vec<Entry>>,
    targets: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Entry {
    row: u32,
    rank: u32,
}

impl TrainingSet {
    pub(crate) fn new(data: &Dataset, features: Vec<usize>) -> Result<Self, GbdtError> {
        if data.is_empty() {
            return Err(GbdtError::EmptyTrain);
        }
        if !data.has_both_classes() {
            return Err(GbdtError::SingleClass);
        }
        let samples = data.samples();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.sort_by(|&a, &b| {
            let (sa, sb) = (&samples[a], &samples[b]);
            sa.label.cmp(&sb.label).then_with(|| {
                features
                    .iter()
                    .map(|&f| sa.features[f].total_cmp(&sb.features[f]))
                    .find(|o| o.is_ne())
                    .unwrap_or(core::cmp::Ordering::Equal)
            })
        });
        let mut distinct = Vec::with_capacity(features.len());
        let mut sorted = Vec::with_capacity(features.len());
        for &f in &features {
            let col: Vec<f64> = order.iter().map(|&r| samples[r].features[f]).collect();
            let mut idx: Vec<u32> = (0..col.len() as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
            let mut values: Vec<f64> = Vec::new();
            let entries = idx
                .iter()
                .map(|&row| {
                    let v = col[row as usize];
                    if values.last() != Some(&v) {
                        values.push(v);
                    }
                    Entry { row, rank: values.len() as u32 - 1 }
                })
                .collect();
            distinct.push(values);
            sorted.push(entries);
        }
        let targets = order.iter().map(|&r| samples[r].label.target()).collect();
        Ok(Self { features, distinct, sorted, targets })
    }

    fn len(&self) -> usize {
        self.targets.len()
    }
}

/// Threshold between consecutive distinct sorted values `lo < hi` such that
/// `lo <= t < hi`.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// A frontier node owning `start..end` of every feature's row list.
#[derive(Clone, Copy)]
struct Segment {
    node: u32,
    start: usize,
    end: usize,
    sum: f64,
    sum_sq: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    lo_rank: u32,
    hi_rank: u32,
    left_count: usize,
}

/// Per-fit buffers reused across trees.
pub(crate) struct Workspace {
    lists: Vec<Vec<Entry>>,
    scratch: Vec<Entry>,
    slot_of_row: Vec<u32>,
    leaf_of_row: Vec<u32>,
}

impl Workspace {
    fn new(set: &TrainingSet) -> Self {
        let n = set.len();
        Self {
            lists: set.sorted.to_vec(),
            scratch: set.sorted[0].clone(),
            slot_of_row: vec![0; n],
            leaf_of_row: vec![0; n],
        }
    }
}

/// Best split of one node along one feature, improving on `best`.
fn scan_segment(
    entries: &[Entry],
    residuals: &[f64],
    seg: &Segment,
    pos: usize,
    msl: usize,
    best: &mut Option<Candidate>,
) {
    let count = entries.len();
    if count < 2 * msl || count < 2 {
        return;
    }
    let parent = seg.sum * seg.sum / count as f64;
    let n = count as f64;
    let (lo, hi) = (msl, count - msl);
    let mut best_gain = best.map_or(f64::NEG_INFINITY, |b| b.gain);
    let mut found = None;
    let mut sl = 0.0;
    // Row counts as floats are exact and avoid integer conversions per row.
    let mut nl = 0.0;
    let mut last = entries[0].rank;
    for (k, e) in entries.iter().enumerate() {
        if e.rank != last && k >= lo && k <= hi {
            let sr = seg.sum - sl;
            let gain = sl * sl / nl + sr * sr / (n - nl) - parent;
            if gain > best_gain {
                best_gain = gain;
                found = Some((k, last, e.rank));
            }
        }
        sl += residuals[e.row as usize];
        nl += 1.0;
        last = e.rank;
    }
    if let Some((left_count, lo_rank, hi_rank)) = found {
        *best = Some(Candidate { gain: best_gain, feature: pos, lo_rank, hi_rank, left_count });
    }
}

/// Grows one residual-fitting tree level by level; `ws.leaf_of_row` ends up
/// holding the leaf node reached by every training row.
fn grow_tree(
    set: &TrainingSet,
    ws: &mut Workspace,
    residuals: &[f64],
    hessians: &[f64],
    params: &GbdtParams,
) -> RegressionTree {
    let n = set.len();
    let msl = params.min_samples_leaf;
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    ws.slot_of_row.iter_mut().for_each(|s| *s = 0);
    let mut frontier = vec![Segment {
        node: 0,
        start: 0,
        end: n,
        sum: residuals.iter().sum(),
        sum_sq: residuals.iter().map(|r| r * r).sum(),
    }];

    // Rows still in the frontier occupy the first `active` list entries.
    let mut active = n;
    for depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        // The root level reads the presorted lists directly.
        let lists: &[Vec<Entry>] = if depth == 0 { &set.sorted } else { &ws.lists };
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        for (pos, list) in lists.iter().enumerate() {
            for (seg, b) in frontier.iter().zip(best.iter_mut()) {
                scan_segment(&list[seg.start..seg.end], residuals, seg, pos, msl, b);
            }
        }

        let mut next: Vec<Segment> = Vec::new();
        let mut offset = 0usize;
        for (slot, cand) in best.iter().enumerate() {
            let seg = frontier[slot];
            let split = cand.filter(|c| c.gain > 0.0 && c.gain > MIN_RELATIVE_GAIN * seg.sum_sq);
            let Some(c) = split else {
                for e in &lists[0][seg.start..seg.end] {
                    ws.leaf_of_row[e.row as usize] = seg.node;
                    ws.slot_of_row[e.row as usize] = DONE;
                }
                continue;
            };
            let values = &set.distinct[c.feature];
            let left = nodes.len() as u32;
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[seg.node as usize] = Node::Internal {
                feature: set.features[c.feature],
                threshold: midpoint(values[c.lo_rank as usize], values[c.hi_rank as usize]),
                left,
                right: left + 1,
            };
            let first = next.len() as u32;
            let sizes = [c.left_count, seg.end - seg.start - c.left_count];
            for (k, size) in sizes.into_iter().enumerate() {
                next.push(Segment { node: left + k as u32, start: offset, end: offset + size, sum: 0.0, sum_sq: 0.0 });
                offset += size;
            }
            for e in &lists[c.feature][seg.start..seg.end] {
                ws.slot_of_row[e.row as usize] = if e.rank <= c.lo_rank { first } else { first + 1 };
            }
        }
        frontier = next;
        if depth + 1 == params.max_depth || frontier.is_empty() {
            break;
        }

        // Child sums in row order, so they only depend on the row multiset.
        for (&slot, &r) in ws.slot_of_row.iter().zip(residuals) {
            if slot != DONE {
                let s = &mut frontier[slot as usize];
                s.sum += r;
                s.sum_sq += r * r;
            }
        }
        // Stable partition of every list into the child segments.
        let mut cursors: Vec<usize> = Vec::with_capacity(frontier.len());
        for pos in 0..set.sorted.len() {
            cursors.clear();
            cursors.extend(frontier.iter().map(|s| s.start));
            let src: &[Entry] = if depth == 0 { &set.sorted[pos] } else { &ws.lists[pos] };
            for e in &src[..active] {
                let slot = ws.slot_of_row[e.row as usize];
                if slot != DONE {
                    let c = &mut cursors[slot as usize];
                    ws.scratch[*c] = *e;
                    *c += 1;
                }
            }
            core::mem::swap(&mut ws.lists[pos], &mut ws.scratch);
        }
        active = offset;
    }
    for row in 0..n {
        let slot = ws.slot_of_row[row];
        if slot != DONE {
            ws.leaf_of_row[row] = frontier[slot as usize].node;
        }
    }

    let mut grad = vec![0.0; nodes.len()];
    let mut hess = vec![0.0; nodes.len()];
    for row in 0..n {
        let leaf = ws.leaf_of_row[row] as usize;
        grad[leaf] += residuals[row];
        hess[leaf] += hessians[row];
    }
    for (i, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf { value } = node {
            *value = newton_leaf(grad[i], hess[i], params.l2_leaf_reg);
        }
    }
    RegressionTree { nodes }
}

/// Minimizer of `-G w + (H + lambda) w^2 / 2`.
pub(crate) fn newton_leaf(residual_sum: f64, hessian_sum: f64, lambda: f64) -> f64 {
    let denom = hessian_sum + lambda;
    if denom > 0.0 {
        residual_sum / denom
    } else {
        0.0
    }
}

/// Runs `params.n_trees` boosting rounds.
pub(crate) fn boost(set: &TrainingSet, params: &GbdtParams) -> GbdtModel {
    let n = set.len();
    let positives: f64 = set.targets.iter().sum();
    let p = positives / n as f64;
    let base_score = libm::log(p / (1.0 - p));
    let mut margins = vec![base_score; n];
    let mut residuals = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut ws = Workspace::new(set);
    for _ in 0..params.n_trees {
        for ((m, t), (r, h)) in margins.iter().zip(&set.targets).zip(residuals.iter_mut().zip(hessians.iter_mut())) {
            let prob = sigmoid(*m);
            *r = t - prob;
            *h = prob * (1.0 - prob);
        }
        let tree = grow_tree(set, &mut ws, &residuals, &hessians, params);
        for (m, &leaf) in margins.iter_mut().zip(&ws.leaf_of_row) {
            if let Node::Leaf { value } = tree.nodes[leaf as usize] {
                *m += params.learning_rate * value;
            }
        }
        trees.push(tree);
    }
    GbdtModel { base_score, learning_rate: params.learning_rate, trees, feature_subset: None }
}

/// Fits on every column of `train`.
pub fn fit(train: &Dataset, params: &GbdtParams) -> Result<GbdtModel, GbdtError> {
    params.validate()?;
    let set = TrainingSet::new(train, (0..train.n_features()).collect())?;
    Ok(boost(&set, params))
}

/// Fits using only the listed original columns; the model records them.
pub fn fit_on_features(train: &Dataset, params: &GbdtParams, subset: &[usize]) -> Result<GbdtModel, GbdtError> {
    params.validate()?;
    if subset.is_empty() || subset.iter().any(|&f| f >= train.n_features()) {
        return Err(GbdtError::BadSubset);
    }
    let set = TrainingSet::new(train, subset.to_vec())?;
    let mut model = boost(&set, params);
    model.feature_subset = Some(subset.to_vec());
    Ok(model)
}
