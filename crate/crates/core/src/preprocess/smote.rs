use alloc::vec::Vec;

use super::PreprocessError;
use crate::dataset::{Dataset, Label, Sample};
use crate::rng::{streams, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoteConfig {
    pub target_per_class: usize,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self { target_per_class: 20_000, k_neighbors: 5, seed: 0 }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` same-class rows nearest to `index` by Euclidean distance, excluding
/// `index` itself. Ties go to the lower row index.
pub fn knn_same_class(data: &Dataset, index: usize, k: usize) -> Result<Vec<usize>, PreprocessError> {
    if index >= data.len() {
        return Err(PreprocessError::RowOutOfRange(index));
    }
    let query = data.get(index);
    let candidates: Vec<usize> = data.indices_of(query.label).into_iter().filter(|&r| r != index).collect();
    nearest_among(data, index, &candidates, k)
}

fn nearest_among(data: &Dataset, index: usize, candidates: &[usize], k: usize) -> Result<Vec<usize>, PreprocessError> {
    if k == 0 || candidates.len() < k {
        return Err(PreprocessError::NotEnoughNeighbors);
    }
    let query = &data.get(index).features;
    let mut ranked: Vec<(f64, usize)> =
        candidates.iter().map(|&r| (squared_distance(query, &data.get(r).features), r)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(k).map(|(_, r)| r).collect())
}

/// Grows every class independently to `target_per_class` rows.
///
/// Output order: all input rows unchanged, then Benign synthetics, then
/// Malignant synthetics. Each synthetic row interpolates a random original
/// of its class towards one of that original's `k` nearest same-class
/// originals.
pub fn smote_expand(data: &Dataset, cfg: &SmoteConfig) -> Result<Dataset, PreprocessError> {
    smote_expand_with_parents(data, cfg).map(|(out, _)| out)
}

/// [`smote_expand`] that also returns, for each synthetic row in output
/// order, the `(origin, partner)` input rows it was interpolated between.
pub fn smote_expand_with_parents(
    data: &Dataset,
    cfg: &SmoteConfig,
) -> Result<(Dataset, Vec<(usize, usize)>), PreprocessError> {
    if cfg.k_neighbors == 0 {
        return Err(PreprocessError::ZeroNeighbors);
    }
    let counts = data.class_counts();
    for label in Label::ALL {
        let current = counts[label.index()];
        if current <= cfg.k_neighbors {
            return Err(PreprocessError::ClassTooSmall(label));
        }
        if cfg.target_per_class < current {
            return Err(PreprocessError::TargetBelowCurrent { label, target: cfg.target_per_class, current });
        }
    }

    let mut samples: Vec<Sample> = data.samples().to_vec();
    samples.reserve(2 * cfg.target_per_class - data.len());
    let mut parents = Vec::with_capacity(2 * cfg.target_per_class - data.len());
    for label in Label::ALL {
        let members = data.indices_of(label);
        let mut neighbors: Vec<Option<Vec<usize>>> = alloc::vec![None; members.len()];
        let mut rng = SeededRng::split(cfg.seed, streams::SMOTE, label.index() as u64);
        for _ in members.len()..cfg.target_per_class {
            let pick = rng.below(members.len());
            let origin = members[pick];
            if neighbors[pick].is_none() {
                let others: Vec<usize> = members.iter().copied().filter(|&r| r != origin).collect();
                neighbors[pick] = Some(nearest_among(data, origin, &others, cfg.k_neighbors)?);
            }
            let list = neighbors[pick].as_ref().unwrap();
            let partner = list[rng.below(list.len())];
            let u = rng.uniform();
            let features = interpolate(&data.get(origin).features, &data.get(partner).features, u);
            samples.push(Sample::synthetic(features, label));
            parents.push((origin, partner));
        }
    }
    let out = Dataset::new(samples, data.feature_names().to_vec()).expect("interpolation keeps rows finite");
    Ok((out, parents))
}

/// `x + u * (n - x)`, clamped coordinate-wise onto the segment.
pub(crate) fn interpolate(x: &[f64], n: &[f64], u: f64) -> Vec<f64> {
    x.iter()
        .zip(n)
        .map(|(&a, &b)| {
            let v = a + u * (b - a);
            v.clamp(a.min(b), a.max(b))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(points: &[f64]) -> Dataset {
        let samples = points.iter().map(|&x| Sample::new(vec![x], Label::Benign)).collect();
        Dataset::with_default_names(samples, 1).unwrap()
    }

    #[test]
    fn nearest_on_a_line() {
        let data = line(&[0.0, 1.0, 10.0]);
        assert_eq!(knn_same_class(&data, 0, 1).unwrap(), vec![1]);
    }

    #[test]
    fn duplicates_come_first_by_index() {
        let data = line(&[0.0, 5.0, 0.0, 0.0, 1.0]);
        assert_eq!(knn_same_class(&data, 0, 3).unwrap(), vec![2, 3, 4]);
    }

    #[test]
    fn other_class_ignored() {
        let samples = vec![
            Sample::new(vec![0.0], Label::Benign),
            Sample::new(vec![0.1], Label::Malignant),
            Sample::new(vec![3.0], Label::Benign),
        ];
        let data = Dataset::with_default_names(samples, 1).unwrap();
        assert_eq!(knn_same_class(&data, 0, 1).unwrap(), vec![2]);
        assert_eq!(knn_same_class(&data, 1, 1), Err(PreprocessError::NotEnoughNeighbors));
    }

    #[test]
    fn midpoint() {
        assert_eq!(interpolate(&[0.0, 0.0], &[1.0, 1.0], 0.5), vec![0.5, 0.5]);
    }

    fn two_class(b: usize, m: usize) -> Dataset {
        let mut samples = Vec::new();
        for i in 0..b {
            samples.push(Sample::new(vec![i as f64, (i * i) as f64], Label::Benign));
        }
        for i in 0..m {
            samples.push(Sample::new(vec![-(i as f64), 3.0 * i as f64], Label::Malignant));
        }
        Dataset::with_default_names(samples, 2).unwrap()
    }

    #[test]
    fn identity_when_target_met() {
        let data = two_class(8, 8);
        let cfg = SmoteConfig { target_per_class: 8, k_neighbors: 3, seed: 1 };
        assert_eq!(smote_expand(&data, &cfg).unwrap(), data);
    }

    #[test]
    fn expands_both_classes() {
        let data = two_class(10, 7);
        let cfg = SmoteConfig { target_per_class: 50, k_neighbors: 3, seed: 1 };
        let out = smote_expand(&data, &cfg).unwrap();
        assert_eq!(out.class_counts(), [50, 50]);
        assert_eq!(&out.samples()[..17], data.samples());
        assert!(out.samples()[17..].iter().all(|s| s.synthetic));
    }

    #[test]
    fn class_too_small() {
        let data = two_class(10, 3);
        let cfg = SmoteConfig { target_per_class: 50, k_neighbors: 3, seed: 1 };
        assert_eq!(smote_expand(&data, &cfg), Err(PreprocessError::ClassTooSmall(Label::Malignant)));
    }
}
