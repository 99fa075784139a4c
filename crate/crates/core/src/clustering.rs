//! Affinity graphs and normalized-cut spectral clustering.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, SpherePoint};
use crate::scalar::Real;
use crate::solver::CoefficientMatrix;

/// k-means restarts per clustering.
pub const RESTARTS: usize = 20;
/// Lloyd iterations per restart.
pub const KMEANS_MAX_ITERS: usize = 300;

const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric nonnegative similarity matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinity<T: Real> {
    a: DMatrix<T>,
}

impl<T: Real> Affinity<T> {
    pub fn new(a: DMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension { expected: a.nrows(), found: a.ncols() });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = a.nrows();
        let tol = T::lit(SYMMETRY_TOL) * a.amax().max(T::one());
        for i in 0..n {
            if a[(i, i)] != T::zero() {
                return Err(Error::InvalidConfig(format!("affinity diagonal entry {i} is nonzero")));
            }
            for j in 0..n {
                if a[(i, j)] < T::zero() {
                    return Err(Error::InvalidConfig(format!("affinity entry ({i}, {j}) is negative")));
                }
                if (a[(i, j)] - a[(j, i)]).abs() > tol {
                    return Err(Error::InvalidConfig(format!("affinity is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
}

/// Builds a valid affinity from a nonnegative matrix by averaging it with
/// its transpose and clearing the diagonal.
fn symmetrized<T: Real>(m: DMatrix<T>) -> Affinity<T> {
    let half = T::lit(0.5);
    let mut a = (&m + m.transpose()) * half;
    a.fill_diagonal(T::zero());
    Affinity { a }
}

/// `(|W| + |W|ᵀ) / 2` with the diagonal cleared.
pub fn affinity_from_w<T: Real>(w: &CoefficientMatrix<T>) -> Affinity<T> {
    symmetrized(w.as_matrix().abs())
}

/// `|WᵀW|` with the diagonal cleared.
pub fn affinity_wtw<T: Real>(w: &CoefficientMatrix<T>) -> Affinity<T> {
    let w = w.as_matrix();
    symmetrized((w.transpose() * w).abs())
}

/// How a coefficient matrix becomes a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AffinityRule {
    #[default]
    Abs,
    Wtw,
}

impl AffinityRule {
    pub fn apply<T: Real>(self, w: &CoefficientMatrix<T>) -> Affinity<T> {
        match self {
            AffinityRule::Abs => affinity_from_w(w),
            AffinityRule::Wtw => affinity_wtw(w),
        }
    }
}

fn kernel_affinity<T: Real>(n: usize, sigma: T, dist: impl Fn(usize, usize) -> T + Sync) -> Result<Affinity<T>> {
    if !(sigma > T::zero() && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("kernel width must be positive, got {sigma}")));
    }
    let s2 = sigma * sigma;
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if i == j { T::zero() } else { (-(dist(i, j).powi(2)) / s2).exp() }).collect())
        .collect();
    Ok(Affinity { a: DMatrix::from_fn(n, n, |i, j| rows[i.min(j)][i.max(j)]) })
}

/// `exp(-d_g(xᵢ, xⱼ)² / σ²)` off the diagonal.
pub fn geodesic_affinity<T: Real>(data: &[SpherePoint<T>], sigma: T) -> Result<Affinity<T>> {
    kernel_affinity(data.len(), sigma, |i, j| geometry::geodesic_distance(&data[i], &data[j]))
}

/// `exp(-‖xᵢ - xⱼ‖² / σ²)` off the diagonal, over the columns of `x`.
pub fn gaussian_affinity<T: Real>(x: &DMatrix<T>, sigma: T) -> Result<Affinity<T>> {
    kernel_affinity(x.ncols(), sigma, |i, j| (x.column(i) - x.column(j)).norm())
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Median over distinct pairs of `dist(i, j)`, or `None` with fewer than two items.
pub fn median_pairwise(n: usize, dist: impl Fn(usize, usize) -> f64) -> Option<f64> {
    median((0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| dist(i, j)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub labels: Vec<usize>,
    pub k: usize,
    pub accuracy: Option<f64>,
}

impl ClusterResult {
    /// Scores against ground truth.
    pub fn score(mut self, truth: &[usize]) -> Result<Self> {
        self.accuracy = Some(clustering_accuracy(&self.labels, truth)?);
        Ok(self)
    }
}

/// Row-normalized embedding onto the `k` bottom eigenvectors of the
/// symmetric normalized Laplacian.
pub fn spectral_embedding<T: Real>(affinity: &Affinity<T>, k: usize) -> Result<DMatrix<f64>> {
    let n = affinity.n();
    let a = affinity.matrix().map(|v| v.as_f64());
    let inv_sqrt: Vec<f64> = a
        .row_iter()
        .map(|r| {
            let d = r.sum();
            if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 }
        })
        .collect();
    // Bottom eigenvectors of I - M are the top eigenvectors of M.
    let mut m = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * a[(i, j)] * inv_sqrt[j]);
    m = (&m + m.transpose()) * 0.5;
    let eig = m.try_symmetric_eigen(f64::EPSILON, 0).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let mut emb = DMatrix::from_fn(n, k, |i, c| eig.eigenvectors[(i, order[c])]);
    for mut row in emb.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    Ok(emb)
}

/// Normalized-cut spectral clustering into `k` groups.
pub fn ncut<T: Real>(affinity: &Affinity<T>, k: usize, seed: u64) -> Result<ClusterResult> {
    let n = affinity.n();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("need 1 <= k <= n = {n}, got k = {k}")));
    }
    if k == 1 {
        return Ok(ClusterResult { labels: vec![0; n], k, accuracy: None });
    }
    if affinity.matrix().iter().all(|v| *v == T::zero()) {
        return Err(Error::DegenerateAffinity);
    }
    let emb = spectral_embedding(affinity, k)?;
    let labels = kmeans(&emb, k, seed).labels;
    Ok(ClusterResult { labels, k, accuracy: None })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Samples an index with probability proportional to `weights`, or
/// uniformly when they are all zero.
fn weighted_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return rng.random_range(0..weights.len());
    }
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn kmeans_once(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> KMeans {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let next = points[weighted_index(rng, &d2)].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &next));
        }
        centers.push(next);
    }

    let dim = points[0].len();
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (label, p) in labels.iter_mut().zip(points) {
            let c = nearest(p, &centers).0;
            changed |= *label != c;
            *label = c;
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&l, p) in labels.iter().zip(points) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Re-seed an empty cluster at the point worst served by its center.
                let far = (0..n)
                    .map(|i| (i, sq_dist(&points[i], &centers[labels[i]])))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
                    .0;
                centers[c] = points[far].clone();
                labels[far] = c;
            }
        }
    }
    let inertia = labels.iter().zip(points).map(|(&l, p)| sq_dist(p, &centers[l])).sum();
    KMeans { labels, inertia }
}

/// k-means++ with [`RESTARTS`] restarts over the rows of `x`. Restart `r`
/// draws from its own stream derived from `seed`, so the best run (lowest
/// inertia, earliest restart on ties) does not depend on scheduling.
pub fn kmeans(x: &DMatrix<f64>, k: usize, seed: u64) -> KMeans {
    let points: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let runs: Vec<KMeans> = (0..RESTARTS)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            kmeans_once(&points, k, &mut rng)
        })
        .collect();
    runs.into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("at least one restart")
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method).
/// Returns `assign[row] = col`.
fn max_assignment(weight: &[Vec<i64>]) -> Vec<usize> {
    let n = weight.len();
    let top = weight.iter().flatten().copied().max().unwrap_or(0);
    let cost = |i: usize, j: usize| top - weight[i][j];
    // Potentials and matching are 1-based with a sentinel column 0.
    let (mut u, mut v) = (vec![0i64; n + 1], vec![0i64; n + 1]);
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let (mut delta, mut j1) = (i64::MAX, 0);
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        while j0 != 0 {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[col_owner[j] - 1] = j - 1;
    }
    assign
}

/// Best fraction of agreeing labels over bijections between predicted and
/// true cluster ids.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let compact = |labels: &[usize]| {
        let mut ids: Vec<usize> = labels.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let dense: Vec<usize> = labels.iter().map(|l| ids.binary_search(l).expect("present")).collect();
        (dense, ids.len())
    };
    let (p, kp) = compact(pred);
    let (t, kt) = compact(truth);
    let size = kp.max(kt);
    let mut table = vec![vec![0i64; size]; size];
    for (&a, &b) in p.iter().zip(&t) {
        table[a][b] += 1;
    }
    let assign = max_assignment(&table);
    let hits: i64 = assign.iter().enumerate().map(|(r, &c)| table[r][c]).sum();
    Ok(hits as f64 / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;
    use nalgebra::DVector;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest, Just, Strategy};

    fn blocks(sizes: &[usize]) -> (Affinity<f64>, Vec<usize>) {
        let truth: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect();
        let n = truth.len();
        let a = DMatrix::from_fn(n, n, |i, j| if i != j && truth[i] == truth[j] { 1.0 } else { 0.0 });
        (Affinity::new(a).unwrap(), truth)
    }

    #[test]
    fn affinity_from_w_examples() {
        assert_eq!(affinity_from_w(&CoefficientMatrix::<f64>::zeros(3)).matrix(), &DMatrix::zeros(3, 3));
        assert_eq!(affinity_from_w(&CoefficientMatrix::<f64>::identity(3)).matrix(), &DMatrix::zeros(3, 3));
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 2.0;
        w[(1, 0)] = -4.0;
        let a = affinity_from_w(&CoefficientMatrix::new(w).unwrap());
        assert_eq!(a.matrix()[(0, 1)], 3.0);
        assert_eq!(a.matrix()[(1, 0)], 3.0);
    }

    #[test]
    fn geodesic_affinity_examples() {
        let p = |c: &[f64]| SpherePoint::normalize(DVector::from_column_slice(c)).unwrap();
        let data = vec![p(&[1.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0])];
        let a = geodesic_affinity(&data, 1.0).unwrap();
        assert_eq!(a.matrix()[(0, 1)], 1.0);
        let want = (-(std::f64::consts::FRAC_PI_2.powi(2))).exp();
        assert!((a.matrix()[(0, 2)] - want).abs() < 1e-15);
        assert!((want - 0.0848).abs() < 1e-4);
        assert!((0..3).all(|i| a.matrix()[(i, i)] == 0.0));
        assert!(geodesic_affinity(&data, 0.0).is_err());
    }

    #[test]
    fn affinity_validation() {
        assert!(Affinity::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])).is_err());
        assert!(Affinity::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0])).is_err());
        assert!(Affinity::new(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0])).is_err());
        assert!(Affinity::new(DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn two_blocks_split_exactly() {
        let (a, truth) = blocks(&[4, 6]);
        let r = ncut(&a, 2, 0).unwrap().score(&truth).unwrap();
        assert_eq!(r.accuracy, Some(1.0));
        // Embedding rows from different components are orthogonal.
        let emb = spectral_embedding(&a, 2).unwrap();
        assert!(emb.row(0).dot(&emb.row(9)).abs() < 1e-10);
        assert!((emb.row(0).dot(&emb.row(1)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn single_cluster_and_degenerate_graph() {
        let zero = Affinity::new(DMatrix::<f64>::zeros(4, 4)).unwrap();
        assert_eq!(ncut(&zero, 1, 0).unwrap().labels, vec![0; 4]);
        assert_eq!(ncut(&zero, 2, 0), Err(Error::DegenerateAffinity));
        assert!(ncut(&zero, 5, 0).is_err());
        assert!(ncut(&zero, 0, 0).is_err());
    }

    #[test]
    fn isolated_vertex_is_tolerated() {
        let (a, _) = blocks(&[3, 3, 1]);
        let r = ncut(&a, 3, 1).unwrap();
        assert_eq!(r.labels.len(), 7);
        assert!(r.labels.iter().all(|&l| l < 3));
    }

    #[test]
    fn planted_partition_with_noise_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth: Vec<usize> = (0..90).map(|i| i / 30).collect();
        let mut a = DMatrix::zeros(90, 90);
        for i in 0..90 {
            for j in (i + 1)..90 {
                let edge = if truth[i] == truth[j] { rng.random::<f64>() < 0.5 } else { rng.random::<f64>() < 0.05 };
                if edge {
                    a[(i, j)] = 1.0;
                    a[(j, i)] = 1.0;
                }
            }
        }
        let r = ncut(&Affinity::new(a).unwrap(), 3, 2).unwrap().score(&truth).unwrap();
        assert!(r.accuracy.unwrap() >= 0.95, "{:?}", r.accuracy);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(clustering_accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[2, 0, 1], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(clustering_accuracy(&[0, 0, 0], &[0, 1, 2]).unwrap(), 1.0 / 3.0);
        assert_eq!(clustering_accuracy(&[0], &[0, 1]), Err(Error::LengthMismatch { left: 1, right: 2 }));
    }

    #[test]
    fn kmeans_is_deterministic_across_pools() {
        let (a, _) = blocks(&[5, 5, 5]);
        let emb = spectral_embedding(&a, 3).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        assert_eq!(one.install(|| kmeans(&emb, 3, 9)), many.install(|| kmeans(&emb, 3, 9)));
    }

    fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(0..k, n)
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force((pred, truth) in (1usize..40, 1usize..7).prop_flat_map(|(n, k)| (labels(n, k), labels(n, k)))) {
            let fast = clustering_accuracy(&pred, &truth).unwrap();
            let slow = oracles::brute_force_accuracy(&pred, &truth);
            prop_assert!((fast - slow).abs() < 1e-12, "{} vs {}", fast, slow);
        }

        #[test]
        fn accuracy_invariant_to_relabeling(
            (pred, truth) in (1usize..40).prop_flat_map(|n| (labels(n, 5), labels(n, 5))),
            perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
        ) {
            let base = clustering_accuracy(&pred, &truth).unwrap();
            let renamed: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
            prop_assert_eq!(clustering_accuracy(&renamed, &truth).unwrap(), base);
            let renamed: Vec<usize> = truth.iter().map(|&l| perm[l]).collect();
            prop_assert_eq!(clustering_accuracy(&pred, &renamed).unwrap(), base);
        }

        #[test]
        fn affinity_ignores_sign(v in prop::collection::vec(-5.0f64..5.0, 16)) {
            let w = DMatrix::from_row_slice(4, 4, &v);
            let a = affinity_from_w(&CoefficientMatrix::new(w.clone()).unwrap());
            let b = affinity_from_w(&CoefficientMatrix::new(-w).unwrap());
            prop_assert_eq!(&a, &b);
            prop_assert!(Affinity::new(a.matrix().clone()).is_ok());
            prop_assert!(Affinity::new(affinity_wtw(&CoefficientMatrix::new(DMatrix::from_row_slice(4, 4, &v)).unwrap()).matrix().clone()).is_ok());
        }

        #[test]
        fn ncut_is_permutation_covariant(
            sizes in prop::collection::vec(3usize..7, 2..4),
            seed in 0u64..1000,
            shuffle_seed in 0u64..1000,
        ) {
            let (a, truth) = blocks(&sizes);
            let n = truth.len();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let permuted = Affinity::new(DMatrix::from_fn(n, n, |i, j| a.matrix()[(perm[i], perm[j])])).unwrap();
            let k = sizes.len();
            let base = ncut(&a, k, seed).unwrap().labels;
            let moved = ncut(&permuted, k, seed).unwrap().labels;
            let pulled: Vec<usize> = (0..n).map(|i| base[perm[i]]).collect();
            prop_assert_eq!(clustering_accuracy(&moved, &pulled).unwrap(), 1.0);
        }
    }
}
