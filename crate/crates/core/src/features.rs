//! Standardization, PCA by cyclic Jacobi rotation, and ranking of the
//! original columns by their variance-weighted loadings.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::dataset::{Dataset, Sample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("need at least two rows, got {0}")]
    TooFewRows(usize),
    #[error("eigendecomposition did not converge after {0} sweeps")]
    NumericalFailure(usize),
    #[error("all eigenvalues are zero")]
    AllZero,
    #[error("k = {k} is too large for {n_features} features")]
    KTooLarge { k: usize, n_features: usize },
    #[error("{requested} components requested, model has {available}")]
    TooManyComponents { requested: usize, available: usize },
    #[error("{names} names for {features} features")]
    NamesMismatch { names: usize, features: usize },
}

/// Off-diagonal Frobenius norm at which Jacobi iteration stops.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub data: Dataset,
    pub means: Vec<f64>,
    /// Population standard deviations; zero-variance columns record 1.0.
    pub stdevs: Vec<f64>,
    /// Columns whose variance was zero (they standardize to all zeros).
    pub degenerate: Vec<bool>,
}

fn column_means(rows: &[Sample], n: usize) -> Vec<f64> {
    let mut means = vec![0.0; n];
    for s in rows {
        for (m, v) in means.iter_mut().zip(&s.features) {
            *m += v;
        }
    }
    let count = rows.len() as f64;
    means.iter_mut().for_each(|m| *m /= count);
    means
}

/// `(x - mean) / stdev` per column with the population standard deviation.
pub fn standardize(data: &Dataset) -> Result<Standardized, FeatureError> {
    if data.len() < 2 {
        return Err(FeatureError::TooFewRows(data.len()));
    }
    let n = data.n_features();
    let means = column_means(data.samples(), n);
    let mut variances = vec![0.0; n];
    for s in data.samples() {
        for ((acc, v), m) in variances.iter_mut().zip(&s.features).zip(&means) {
            *acc += (v - m) * (v - m);
        }
    }
    let count = data.len() as f64;
    let mut degenerate = vec![false; n];
    let stdevs: Vec<f64> = variances
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let sd = libm::sqrt(v / count);
            if sd > 0.0 {
                sd
            } else {
                degenerate[j] = true;
                1.0
            }
        })
        .collect();
    let samples = data
        .samples()
        .iter()
        .map(|s| {
            let features = s
                .features
                .iter()
                .enumerate()
                .map(|(j, v)| if degenerate[j] { 0.0 } else { (v - means[j]) / stdevs[j] })
                .collect();
            Sample { features, label: s.label, synthetic: s.synthetic }
        })
        .collect();
    let data = Dataset::new(samples, data.feature_names().to_vec()).expect("standardized rows stay finite");
    Ok(Standardized { data, means, stdevs, degenerate })
}

/// Symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl SymMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    sum += self.get(i, j) * self.get(i, j);
                }
            }
        }
        libm::sqrt(sum)
    }
}

/// Population covariance (divides by `n`).
pub fn covariance(data: &Dataset) -> Result<SymMatrix, FeatureError> {
    if data.len() < 2 {
        return Err(FeatureError::TooFewRows(data.len()));
    }
    let n = data.n_features();
    let means = column_means(data.samples(), n);
    let mut values = vec![0.0; n * n];
    let mut centered = vec![0.0; n];
    for s in data.samples() {
        for (c, (v, m)) in centered.iter_mut().zip(s.features.iter().zip(&means)) {
            *c = v - m;
        }
        for i in 0..n {
            for j in i..n {
                values[i * n + j] += centered[i] * centered[j];
            }
        }
    }
    let count = data.len() as f64;
    for i in 0..n {
        for j in i..n {
            let v = values[i * n + j] / count;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(SymMatrix { n, values })
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotation.
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as rows, each signed so its largest-magnitude coordinate is
/// positive.
pub fn jacobi_eigen(matrix: &SymMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>), FeatureError> {
    let n = matrix.n;
    let mut a = matrix.clone();
    // v holds eigenvectors as columns.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut sweeps = 0;
    while a.off_diagonal_norm() > JACOBI_TOLERANCE {
        if sweeps == MAX_SWEEPS {
            return Err(FeatureError::NumericalFailure(MAX_SWEEPS));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut row: Vec<f64> = (0..n).map(|k| v[k * n + col]).collect();
            let mut lead = 0;
            for k in 1..n {
                if libm::fabs(row[k]) > libm::fabs(row[lead]) {
                    lead = k;
                }
            }
            if row[lead] < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
            row
        })
        .collect();
    Ok((eigenvalues, vectors))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub means: Vec<f64>,
    pub stdevs: Vec<f64>,
    /// Principal directions as rows, strongest first.
    pub components: Vec<Vec<f64>>,
    /// Descending; one per component of the full decomposition.
    pub eigenvalues: Vec<f64>,
    /// Shares of total variance over all components of the full decomposition.
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    /// The same model restricted to its first `m` components.
    pub fn truncated(&self, m: usize) -> Result<PcaModel, FeatureError> {
        if m > self.components.len() {
            return Err(FeatureError::TooManyComponents { requested: m, available: self.components.len() });
        }
        Ok(PcaModel { components: self.components[..m].to_vec(), ..self.clone() })
    }

    /// Coordinates of an already-standardized row along each retained component.
    pub fn project(&self, standardized: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.iter().zip(standardized).map(|(a, b)| a * b).sum()).collect()
    }

    /// Inverse of [`PcaModel::project`] in standardized space.
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features()];
        for (c, s) in self.components.iter().zip(scores) {
            for (o, v) in out.iter_mut().zip(c) {
                *o += s * v;
            }
        }
        out
    }
}

/// PCA of standardized rows, all components retained.
///
/// `means`/`stdevs` on the returned model are the standardization statistics
/// when `stats` is given, otherwise those of `standardized` itself.
pub fn fit_pca(standardized: &Dataset, stats: Option<(&[f64], &[f64])>) -> Result<PcaModel, FeatureError> {
    let cov = covariance(standardized)?;
    let (raw_eigenvalues, components) = jacobi_eigen(&cov)?;
    let eigenvalues: Vec<f64> = raw_eigenvalues.into_iter().map(|e| e.max(0.0)).collect();
    let explained_variance_ratio = explained_variance_ratio(&eigenvalues)?;
    let n = standardized.n_features();
    let (means, stdevs) = match stats {
        Some((m, s)) => (m.to_vec(), s.to_vec()),
        None => (column_means(standardized.samples(), n), vec![1.0; n]),
    };
    Ok(PcaModel { means, stdevs, components, eigenvalues, explained_variance_ratio })
}

pub fn explained_variance_ratio(eigenvalues: &[f64]) -> Result<Vec<f64>, FeatureError> {
    let total: f64 = eigenvalues.iter().sum();
    if total.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) {
        return Err(FeatureError::AllZero);
    }
    Ok(eigenvalues.iter().map(|e| e / total).collect())
}

/// Smallest `m` whose cumulative ratio reaches `threshold`.
///
/// Cumulative sums within 1e-12 of the threshold count as reaching it, so a
/// cumulative 0.6 + 0.3 meets a 0.9 threshold despite rounding.
pub fn choose_num_components(ratios: &[f64], threshold: f64) -> usize {
    let mut cumulative = 0.0;
    for (i, r) in ratios.iter().enumerate() {
        cumulative += r;
        if cumulative >= threshold - 1e-12 {
            return i + 1;
        }
    }
    ratios.len()
}

/// `(component index starting at 1, cumulative explained variance)` rows.
pub fn cumulative_variance_curve(ratios: &[f64]) -> Vec<(usize, f64)> {
    let mut cumulative = 0.0;
    ratios
        .iter()
        .enumerate()
        .map(|(i, r)| {
            cumulative += r;
            (i + 1, cumulative)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRanking {
    pub scores: Vec<f64>,
    /// Column indices, highest score first.
    pub top_indices: Vec<usize>,
    /// Column indices of the last `k` ranking positions, lowest first.
    pub bottom_indices: Vec<usize>,
    pub top: Vec<String>,
    pub bottom: Vec<String>,
}

/// Scores column `j` as `sum_i ratio[i] * |components[i][j]|` over the first
/// `m` components. Columns are ranked by descending score, equal scores by
/// column index; `top` is the first `k` ranks and `bottom` the last `k`,
/// listed from the lowest rank upwards.
pub fn rank_features(model: &PcaModel, m: usize, k: usize, names: &[String]) -> Result<FeatureRanking, FeatureError> {
    let n = model.n_features();
    if names.len() != n {
        return Err(FeatureError::NamesMismatch { names: names.len(), features: n });
    }
    if k == 0 || 2 * k > n {
        return Err(FeatureError::KTooLarge { k, n_features: n });
    }
    if m > model.components.len() {
        return Err(FeatureError::TooManyComponents { requested: m, available: model.components.len() });
    }
    let mut scores = vec![0.0; n];
    for (component, ratio) in model.components[..m].iter().zip(&model.explained_variance_ratio) {
        for (s, loading) in scores.iter_mut().zip(component) {
            *s += ratio * libm::fabs(*loading);
        }
    }
    let mut descending: Vec<usize> = (0..n).collect();
    descending.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let top_indices: Vec<usize> = descending[..k].to_vec();
    let bottom_indices: Vec<usize> = descending.iter().rev().take(k).copied().collect();
    Ok(FeatureRanking {
        top: top_indices.iter().map(|&j| names[j].clone()).collect(),
        bottom: bottom_indices.iter().map(|&j| names[j].clone()).collect(),
        scores,
        top_indices,
        bottom_indices,
    })
}

/// Standardize, decompose, pick the component count for `threshold`, rank.
pub fn select_features(
    data: &Dataset,
    threshold: f64,
    k: usize,
) -> Result<(PcaModel, usize, FeatureRanking), FeatureError> {
    let std = standardize(data)?;
    let model = fit_pca(&std.data, Some((&std.means, &std.stdevs)))?;
    let m = choose_num_components(&model.explained_variance_ratio, threshold);
    let selected = model.truncated(m)?;
    let ranking = rank_features(&selected, m, k, data.feature_names())?;
    Ok((model, m, ranking))
}
