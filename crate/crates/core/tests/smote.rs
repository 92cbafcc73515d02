use privfed_core::dataset::{Dataset, Label, Sample};
use privfed_core::preprocess::{knn_same_class, smote_expand, smote_expand_with_parents, SmoteConfig};
use privfed_core::SeededRng;

fn random_dataset(rng: &mut SeededRng, rows: usize, dims: usize) -> Dataset {
    let samples = (0..rows)
        .map(|i| {
            let features = (0..dims).map(|_| rng.uniform() * 10.0 - 5.0).collect();
            Sample::new(features, if i % 3 == 0 { Label::Malignant } else { Label::Benign })
        })
        .collect();
    Dataset::with_default_names(samples, dims).unwrap()
}

fn brute_force_knn(data: &Dataset, index: usize, k: usize) -> Vec<usize> {
    let query = data.get(index);
    let mut candidates: Vec<(f64, usize)> = data
        .samples()
        .iter()
        .enumerate()
        .filter(|(j, s)| *j != index && s.label == query.label)
        .map(|(j, s)| {
            let d: f64 = s.features.iter().zip(&query.features).map(|(a, b)| (a - b).powi(2)).sum();
            (d.sqrt(), j)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.into_iter().take(k).map(|(_, j)| j).collect()
}

#[test]
fn knn_matches_brute_force() {
    for trial in 0..100u64 {
        let mut rng = SeededRng::new(trial, 100);
        let data = random_dataset(&mut rng, 200, 4);
        let index = rng.below(200);
        let k = 1 + rng.below(8);
        assert_eq!(knn_same_class(&data, index, k).unwrap(), brute_force_knn(&data, index, k), "trial {trial}");
    }
}

#[test]
fn knn_ties_prefer_lower_index() {
    let samples = [0.0, 1.0, -1.0, 1.0, 2.0].iter().map(|&x| Sample::new(vec![x], Label::Benign)).collect();
    let data = Dataset::with_default_names(samples, 1).unwrap();
    assert_eq!(knn_same_class(&data, 0, 3).unwrap(), vec![1, 2, 3]);
}

#[test]
fn synthetics_lie_between_parents() {
    let mut rng = SeededRng::new(7, 101);
    let data = random_dataset(&mut rng, 90, 6);
    let cfg = SmoteConfig { target_per_class: 500, k_neighbors: 5, seed: 11 };
    let (out, parents) = smote_expand_with_parents(&data, &cfg).unwrap();
    assert_eq!(out.class_counts(), [500, 500]);
    assert_eq!(&out.samples()[..data.len()], data.samples());
    assert_eq!(parents.len(), 1000 - data.len());
    for (s, &(a, b)) in out.samples()[data.len()..].iter().zip(&parents) {
        assert!(s.synthetic);
        let (pa, pb) = (data.get(a), data.get(b));
        assert_eq!(s.label, pa.label);
        assert_eq!(pa.label, pb.label);
        assert!(knn_same_class(&data, a, 5).unwrap().contains(&b));
        for ((x, lo), hi) in s.features.iter().zip(&pa.features).zip(&pb.features) {
            assert!(*x >= lo.min(*hi) && *x <= lo.max(*hi));
        }
    }
}

#[test]
fn deterministic_and_seed_sensitive() {
    let mut rng = SeededRng::new(1, 102);
    let data = random_dataset(&mut rng, 60, 3);
    let cfg = SmoteConfig { target_per_class: 100, k_neighbors: 3, seed: 5 };
    let a = smote_expand(&data, &cfg).unwrap();
    assert_eq!(a, smote_expand(&data, &cfg).unwrap());
    let b = smote_expand(&data, &SmoteConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a, b);
}

#[test]
fn rejects_bad_configs() {
    let mut rng = SeededRng::new(2, 103);
    let data = random_dataset(&mut rng, 30, 2);
    assert!(smote_expand(&data, &SmoteConfig { target_per_class: 100, k_neighbors: 0, seed: 0 }).is_err());
    assert!(smote_expand(&data, &SmoteConfig { target_per_class: 5, k_neighbors: 3, seed: 0 }).is_err());
    assert!(smote_expand(&data, &SmoteConfig { target_per_class: 100, k_neighbors: 10, seed: 0 }).is_err());
}
