//! Nearest-neighbour classification on the sphere and on low-rank features.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{self, SpherePoint};
use crate::scalar::Real;
use crate::solver::CoefficientMatrix;

/// Sphere points with one class id each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSphereSet<T: Real> {
    points: Vec<SpherePoint<T>>,
    labels: Vec<usize>,
}

impl<T: Real> LabeledSphereSet<T> {
    pub fn new(points: Vec<SpherePoint<T>>, labels: Vec<usize>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch { left: points.len(), right: labels.len() });
        }
        Ok(Self { points, labels })
    }

    pub fn points(&self) -> &[SpherePoint<T>] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of distinct class ids.
    pub fn class_count(&self) -> usize {
        let mut seen = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn into_parts(self) -> (Vec<SpherePoint<T>>, Vec<usize>) {
        (self.points, self.labels)
    }
}

/// Majority vote over the `k` smallest distances. Distance ties go to the
/// lower index, vote ties to the smaller class id.
fn vote<T: Real>(mut dists: Vec<(T, usize)>, labels: &[usize], k: usize) -> usize {
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &(_, idx) in dists.iter().take(k) {
        *counts.entry(labels[idx]).or_default() += 1;
    }
    let mut best = (0, usize::MAX);
    for (&label, &count) in &counts {
        if count > best.0 {
            best = (count, label);
        }
    }
    best.1
}

fn check_k(k: usize, len: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::EmptyTrain);
    }
    if k == 0 || k > len {
        return Err(Error::InvalidConfig(format!("need 1 <= k <= {len}, got k = {k}")));
    }
    Ok(())
}

/// Geodesic k-nearest-neighbour prediction.
pub fn gknn_predict<T: Real>(train: &LabeledSphereSet<T>, query: &SpherePoint<T>, k: usize) -> Result<usize> {
    check_k(k, train.len())?;
    let dists = train
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (geometry::geodesic_distance(p, query), i))
        .collect();
    Ok(vote(dists, &train.labels, k))
}

/// Euclidean k-nearest-neighbour prediction over the columns of `features`.
///
/// `train_cols[i]` carries label `labels[i]`; each entry of `test_cols` is
/// classified by its nearest training columns.
pub fn knn_columns_predict<T: Real>(
    features: &DMatrix<T>,
    train_cols: &[usize],
    labels: &[usize],
    test_cols: &[usize],
    k: usize,
) -> Result<Vec<usize>> {
    if train_cols.len() != labels.len() {
        return Err(Error::LengthMismatch { left: train_cols.len(), right: labels.len() });
    }
    check_k(k, train_cols.len())?;
    let n = features.ncols();
    if let Some(&bad) = train_cols.iter().chain(test_cols).find(|&&c| c >= n) {
        return Err(Error::Index { index: bad, len: n });
    }
    Ok(test_cols
        .iter()
        .map(|&t| {
            let q = features.column(t);
            let dists = train_cols
                .iter()
                .enumerate()
                .map(|(i, &c)| ((features.column(c) - q).norm_squared(), i))
                .collect();
            vote(dists, labels, k)
        })
        .collect())
}

/// kNN on columns of a representation matrix solved jointly over training
/// and test points.
pub fn lrr_feature_predict<T: Real>(
    w: &CoefficientMatrix<T>,
    train_cols: &[usize],
    labels: &[usize],
    test_cols: &[usize],
    k: usize,
) -> Result<Vec<usize>> {
    knn_columns_predict(w.as_matrix(), train_cols, labels, test_cols, k)
}

/// Fraction of positions where `pred` equals `truth`.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}
