//! Per-point quadratic forms of the manifold reconstruction error.
//!
//! For every data point `x_i` the squared tangent-space residual
//! `|Σ_j w_j log_{x_i}(x_j)|²` is the quadratic form `wᵀ Q_i w` with
//! `Q_i = V_iᵀ V_i`, where column `j` of `V_i` is `log_{x_i}(x_j)`. Building
//! `Q_i` through its factor keeps it positive semi-definite by construction.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{self, SpherePoint};
use crate::scalar::Real;

/// The matrices `Q_i`, one `n × n` symmetric PSD matrix per data point.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSet<T: Real> {
    mats: Vec<DMatrix<T>>,
}

impl<T: Real> GramSet<T> {
    /// Wraps precomputed matrices after checking they are all `n × n`.
    pub fn from_mats(mats: Vec<DMatrix<T>>) -> Result<Self> {
        let n = mats.len();
        for q in &mats {
            if q.nrows() != n || q.ncols() != n {
                return Err(Error::Dimension { expected: n, found: q.nrows().max(q.ncols()) });
            }
        }
        Ok(Self { mats })
    }

    pub fn mats(&self) -> &[DMatrix<T>] {
        &self.mats
    }

    pub fn get(&self, i: usize) -> &DMatrix<T> {
        &self.mats[i]
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// `max_i λ_max(Q_i)`, computed from the matrices themselves.
    pub fn max_eigenvalue(&self) -> Result<T> {
        let tops = self
            .mats
            .par_iter()
            .map(|q| largest_symmetric_eigenvalue(q.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(tops.into_iter().fold(T::zero(), |a, b| a.max(b)))
    }
}

/// Weights `g_ij` of the weighted-ℓ1 penalty; zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicWeightMatrix<T: Real> {
    weights: DMatrix<T>,
    sigma: Option<T>,
}

impl<T: Real> GeodesicWeightMatrix<T> {
    /// All off-diagonal weights equal to one (the Euclidean baselines).
    pub fn uniform(n: usize) -> Self {
        let weights = DMatrix::from_fn(n, n, |i, j| if i == j { T::zero() } else { T::one() });
        Self { weights, sigma: None }
    }

    pub fn weights(&self) -> &DMatrix<T> {
        &self.weights
    }

    /// Distance scale, when the weights were built from geodesic distances.
    pub fn sigma(&self) -> Option<T> {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }
}

fn check_points<T: Real>(data: &[SpherePoint<T>]) -> Result<usize> {
    if data.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: data.len() });
    }
    let dim = data[0].dim();
    if let Some(bad) = data.iter().find(|p| p.dim() != dim) {
        return Err(Error::Dimension { expected: dim, found: bad.dim() });
    }
    Ok(dim)
}

/// The factors `V_i`: column `j` of the `(m+1) × n` matrix `V_i` holds
/// `log_{x_i}(x_j)` in ambient coordinates, so column `i` is zero.
pub fn build_tangent_factors<T: Real>(data: &[SpherePoint<T>]) -> Result<Vec<DMatrix<T>>> {
    let dim = check_points(data)?;
    let n = data.len();
    data.par_iter()
        .map(|xi| {
            let mut v = DMatrix::zeros(dim, n);
            for (j, xj) in data.iter().enumerate() {
                let l = geometry::log_coords(xi.coords(), xj.coords())?;
                v.set_column(j, &l);
            }
            Ok(v)
        })
        .collect()
}

/// Factors for the Euclidean baselines: column `j` of `V_i` is `x_j - x_i`,
/// which makes `wᵀQ_i w = |X w - x_i|²` whenever `Σ_j w_j = 1`.
pub fn build_euclidean_factors<T: Real>(data: &[DVector<T>]) -> Result<Vec<DMatrix<T>>> {
    if data.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: data.len() });
    }
    let dim = data[0].len();
    if let Some(bad) = data.iter().find(|x| x.len() != dim) {
        return Err(Error::Dimension { expected: dim, found: bad.len() });
    }
    let n = data.len();
    Ok(data
        .par_iter()
        .map(|xi| DMatrix::from_fn(dim, n, |r, j| data[j][r] - xi[r]))
        .collect())
}

/// `Q_i = V_iᵀ V_i` for every factor.
pub fn build_gram<T: Real>(factors: &[DMatrix<T>]) -> GramSet<T> {
    let mats = factors.par_iter().map(|v| v.tr_mul(v)).collect();
    GramSet { mats }
}

/// `max_i λ_max(V_iᵀ V_i)` evaluated on whichever of `V_iᵀV_i`, `V_iV_iᵀ`
/// is smaller; both share their nonzero spectrum.
pub fn max_gram_eigenvalue<T: Real>(factors: &[DMatrix<T>]) -> Result<T> {
    let tops = factors
        .par_iter()
        .map(|v| {
            let small = if v.nrows() <= v.ncols() { v * v.transpose() } else { v.tr_mul(v) };
            largest_symmetric_eigenvalue(small)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tops.into_iter().fold(T::zero(), |a, b| a.max(b)))
}

fn largest_symmetric_eigenvalue<T: Real>(m: DMatrix<T>) -> Result<T> {
    if m.is_empty() {
        return Ok(T::zero());
    }
    let eig = m.try_symmetric_eigen(T::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    Ok(eig.eigenvalues.iter().copied().fold(T::zero(), |a, b| a.max(b)))
}

/// `g_ij = exp(d_g(x_i, x_j) / σ)` off the diagonal, `g_ii = 0`.
pub fn build_geodesic_weights<T: Real>(
    data: &[SpherePoint<T>],
    sigma: T,
) -> Result<GeodesicWeightMatrix<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    let n = data.len();
    let mut weights = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let g = (geometry::geodesic_distance(&data[i], &data[j]) / sigma).exp();
            weights[(i, j)] = g;
            weights[(j, i)] = g;
        }
    }
    Ok(GeodesicWeightMatrix { weights, sigma: Some(sigma) })
}
