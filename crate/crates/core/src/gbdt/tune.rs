use alloc::vec;
use alloc::vec::Vec;

use super::train::{boost, TrainingSet};
use super::{label_for, sigmoid, GbdtError, GbdtParams};
use crate::dataset::{Dataset, Label};
use crate::rng::{streams, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneResult {
    pub params: GbdtParams,
    pub cv_accuracy: f64,
    /// Position of `params` in the grid.
    pub index: usize,
}

/// Depth {2,4,6} x learning rate {0.05,0.1,0.3} x trees {100,200} x L2 {1,3}.
pub fn default_grid() -> Vec<GbdtParams> {
    let mut grid = Vec::with_capacity(36);
    for max_depth in [2, 4, 6] {
        for learning_rate in [0.05, 0.1, 0.3] {
            for n_trees in [100, 200] {
                for l2_leaf_reg in [1.0, 3.0] {
                    grid.push(GbdtParams { n_trees, learning_rate, max_depth, min_samples_leaf: 1, l2_leaf_reg });
                }
            }
        }
    }
    grid
}

/// Fold index per row: each class is shuffled separately and dealt
/// round-robin into `folds` folds.
pub fn stratified_folds(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<usize>, GbdtError> {
    if folds < 2 {
        return Err(GbdtError::InvalidParams("at least two folds are required"));
    }
    let mut assignment = vec![0; data.len()];
    let mut rng = SeededRng::new(seed, streams::CV_FOLDS);
    for label in Label::ALL {
        let mut rows = data.indices_of(label);
        if rows.len() < folds {
            return Err(GbdtError::TooFewForFolds { folds });
        }
        rng.shuffle(&mut rows);
        for (i, r) in rows.into_iter().enumerate() {
            assignment[r] = i % folds;
        }
    }
    Ok(assignment)
}

fn same_shape(a: &GbdtParams, b: &GbdtParams) -> bool {
    a.max_depth == b.max_depth
        && a.min_samples_leaf == b.min_samples_leaf
        && a.learning_rate.to_bits() == b.learning_rate.to_bits()
        && a.l2_leaf_reg.to_bits() == b.l2_leaf_reg.to_bits()
}

/// Grid search by mean stratified k-fold accuracy; earlier grid entries win
/// ties.
///
/// Grid points that differ only in `n_trees` share one fit per fold: boosting
/// is deterministic, so a shorter model is a prefix of the longer one and
/// each point is scored at its own tree count.
pub fn tune(
    train: &Dataset,
    grid: &[GbdtParams],
    folds: usize,
    seed: u64,
    subset: Option<&[usize]>,
) -> Result<TuneResult, GbdtError> {
    if grid.is_empty() {
        return Err(GbdtError::EmptyGrid);
    }
    for p in grid {
        p.validate()?;
    }
    let features: Vec<usize> = match subset {
        Some(s) if s.is_empty() || s.iter().any(|&f| f >= train.n_features()) => return Err(GbdtError::BadSubset),
        Some(s) => s.to_vec(),
        None => (0..train.n_features()).collect(),
    };
    let assignment = stratified_folds(train, folds, seed)?;
    let mut fold_sets = Vec::with_capacity(folds);
    for fold in 0..folds {
        let fit_rows: Vec<usize> = (0..train.len()).filter(|&r| assignment[r] != fold).collect();
        let eval_rows: Vec<usize> = (0..train.len()).filter(|&r| assignment[r] == fold).collect();
        let set = TrainingSet::new(&train.select(&fit_rows), features.clone())?;
        fold_sets.push((set, eval_rows));
    }

    let mut accuracy = vec![0.0; grid.len()];
    let mut done = vec![false; grid.len()];
    for start in 0..grid.len() {
        if done[start] {
            continue;
        }
        let members: Vec<usize> =
            (start..grid.len()).filter(|&i| !done[i] && same_shape(&grid[start], &grid[i])).collect();
        let longest = members.iter().map(|&i| grid[i].n_trees).max().unwrap_or(0);
        let params = GbdtParams { n_trees: longest, ..grid[start] };
        for (set, eval_rows) in &fold_sets {
            let model = boost(set, &params);
            let mut margins: Vec<f64> = vec![model.base_score; eval_rows.len()];
            let mut correct_at = vec![0usize; longest + 1];
            let count = |margins: &[f64]| {
                eval_rows.iter().zip(margins).filter(|(&r, &m)| label_for(sigmoid(m)) == train.get(r).label).count()
            };
            let wanted = |t: usize| members.iter().any(|&i| grid[i].n_trees == t);
            if wanted(0) {
                correct_at[0] = count(&margins);
            }
            for (t, tree) in model.trees.iter().enumerate() {
                for (m, &r) in margins.iter_mut().zip(eval_rows) {
                    *m += model.learning_rate * tree.predict(&train.get(r).features);
                }
                if wanted(t + 1) {
                    correct_at[t + 1] = count(&margins);
                }
            }
            for &i in &members {
                accuracy[i] += correct_at[grid[i].n_trees] as f64 / eval_rows.len() as f64;
            }
        }
        for &i in &members {
            accuracy[i] /= folds as f64;
            done[i] = true;
        }
    }

    let mut best = 0;
    for i in 1..grid.len() {
        if accuracy[i] > accuracy[best] {
            best = i;
        }
    }
    Ok(TuneResult { params: grid[best], cv_accuracy: accuracy[best], index: best })
}
