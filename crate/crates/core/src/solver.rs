//! Linearized augmented-Lagrangian solver for manifold low-rank representation.
//!
//! Minimizes
//!
//! ```text
//! ½ Σ_i w_iᵀ Q_i w_i + λ‖W‖_* + ν Σ_i Σ_{j≠i} g_ji |W_ji|   s.t.  1ᵀ w_i = 1
//! ```
//!
//! Each iteration linearizes the smooth part of the augmented Lagrangian
//! (quadratic term, multiplier term, penalty term, plus a subgradient of the
//! weighted ℓ1 term) around the current iterate, takes a proximal step on the
//! nuclear norm by singular value thresholding, then performs dual ascent on
//! the column-sum multipliers and grows the penalty.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::SpherePoint;
use crate::gram::{self, GeodesicWeightMatrix, GramSet};
use crate::linalg;
use crate::scalar::Real;

/// Singular values at or below `RANK_TOL · σ_max` do not count toward rank.
pub const RANK_TOL: f64 = 1e-8;

/// The `n × n` representation matrix; column `i` represents data point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix<T: Real>(DMatrix<T>);

impl<T: Real> CoefficientMatrix<T> {
    pub fn new(w: DMatrix<T>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::Dimension { expected: w.nrows(), found: w.ncols() });
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(w))
    }

    /// Every entry `1/n`; satisfies the column-sum constraint exactly.
    pub fn uniform(n: usize) -> Self {
        Self(DMatrix::from_element(n, n, T::one() / T::lit(n as f64)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.0
    }

    pub fn column_sums(&self) -> DVector<T> {
        DVector::from_iterator(self.n(), self.0.column_iter().map(|c| c.sum()))
    }

    /// `max_i |Σ_j W_ji - 1|`.
    pub fn violation(&self) -> T {
        self.0
            .column_iter()
            .map(|c| (c.sum() - T::one()).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// How the linearization weight `μ_k` tracks the penalty `β_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuRule<T: Real> {
    /// `μ_k = factor · (n·β_k + L_Q)`, where `L_Q = max_i λ_max(Q_i)`. With
    /// `factor ≥ 1` this dominates the Lipschitz constant of the smooth part.
    Lipschitz { factor: T },
    /// A constant `μ`.
    Fixed(T),
}

impl<T: Real> MuRule<T> {
    pub fn mu(&self, beta: T, n: usize, lipschitz: T) -> T {
        match *self {
            MuRule::Lipschitz { factor } => factor * (T::lit(n as f64) * beta + lipschitz),
            MuRule::Fixed(mu) => mu,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WInit<T: Real> {
    Uniform,
    Matrix(CoefficientMatrix<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T: Real> {
    /// Nuclear-norm weight.
    pub lambda: T,
    /// Weighted-ℓ1 weight.
    pub nu: T,
    /// Distance scale of the ℓ1 weights.
    pub sigma: T,
    pub beta0: T,
    pub beta_max: T,
    pub rho: T,
    /// Column-sum tolerance that defines convergence.
    pub eps: T,
    pub max_iters: usize,
    pub mu_rule: MuRule<T>,
    /// Zero the diagonal of `W` after every thresholding step.
    pub forbid_diagonal: bool,
    pub w_init: WInit<T>,
    /// Largest accepted number of data points.
    pub n_max: usize,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(0.1),
            nu: T::lit(0.01),
            sigma: T::one(),
            beta0: T::lit(1e-6),
            beta_max: T::lit(1e10),
            rho: T::lit(1.1),
            eps: T::lit(1e-8),
            max_iters: 1000,
            mu_rule: MuRule::Lipschitz { factor: T::one() },
            forbid_diagonal: false,
            w_init: WInit::Uniform,
            n_max: 2000,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return bad(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(self.nu >= T::zero() && self.nu.is_finite()) {
            return bad(format!("nu must be nonnegative, got {}", self.nu));
        }
        if !pos(self.sigma) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !pos(self.beta0) || !pos(self.beta_max) || self.beta0 > self.beta_max {
            return bad(format!("need 0 < beta0 <= beta_max, got {} and {}", self.beta0, self.beta_max));
        }
        if !(self.rho > T::one() && self.rho.is_finite()) {
            return bad(format!("rho must exceed 1, got {}", self.rho));
        }
        if !pos(self.eps) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        match self.mu_rule {
            MuRule::Lipschitz { factor } if !pos(factor) => {
                bad(format!("mu factor must be positive, got {factor}"))
            }
            MuRule::Fixed(mu) if !pos(mu) => bad(format!("mu must be positive, got {mu}")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<T: Real> {
    pub w: CoefficientMatrix<T>,
    /// One multiplier per column-sum constraint.
    pub y: DVector<T>,
    pub beta: T,
    pub iter: usize,
}

impl<T: Real> SolverState<T> {
    pub fn new(w: CoefficientMatrix<T>, beta: T) -> Self {
        let n = w.n();
        Self { w, y: DVector::zeros(n), beta, iter: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T: Real> {
    pub iter: usize,
    pub objective: T,
    pub violation: T,
    pub rank: usize,
    pub beta: T,
    pub mu: T,
}

pub type SolverTrace<T> = Vec<TraceRecord<T>>;

/// Output of [`solve`]. A run that hits `max_iters` is still returned, with
/// `converged == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T: Real> {
    pub w: CoefficientMatrix<T>,
    pub y: DVector<T>,
    pub trace: SolverTrace<T>,
    pub converged: bool,
}

impl<T: Real> Solution<T> {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn final_objective(&self) -> Option<T> {
        self.trace.last().map(|r| r.objective)
    }
}

/// Everything the iterations need that depends only on the data.
#[derive(Debug, Clone)]
pub struct Problem<T: Real> {
    pub grams: GramSet<T>,
    pub weights: GeodesicWeightMatrix<T>,
    /// `max_i λ_max(Q_i)`.
    pub lipschitz: T,
}

impl<T: Real> Problem<T> {
    pub fn new(grams: GramSet<T>, weights: GeodesicWeightMatrix<T>) -> Result<Self> {
        if grams.len() != weights.n() {
            return Err(Error::Dimension { expected: grams.len(), found: weights.n() });
        }
        let lipschitz = grams.max_eigenvalue()?;
        Ok(Self { grams, weights, lipschitz })
    }

    fn from_factors(factors: Vec<DMatrix<T>>, weights: GeodesicWeightMatrix<T>) -> Result<Self> {
        let lipschitz = gram::max_gram_eigenvalue(&factors)?;
        let grams = gram::build_gram(&factors);
        Ok(Self { grams, weights, lipschitz })
    }

    /// Tangent-space quadratic forms and geodesic ℓ1 weights on the sphere.
    pub fn sphere(data: &[SpherePoint<T>], sigma: T, n_max: usize) -> Result<Self> {
        check_size(data.len(), n_max)?;
        let weights = gram::build_geodesic_weights(data, sigma)?;
        Self::from_factors(gram::build_tangent_factors(data)?, weights)
    }

    /// Euclidean differences and unit ℓ1 weights.
    pub fn euclidean(data: &[DVector<T>], n_max: usize) -> Result<Self> {
        check_size(data.len(), n_max)?;
        let weights = GeodesicWeightMatrix::uniform(data.len());
        Self::from_factors(gram::build_euclidean_factors(data)?, weights)
    }

    pub fn n(&self) -> usize {
        self.grams.len()
    }
}

fn check_size(n: usize, n_max: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    if n > n_max {
        return Err(Error::TooLarge { n, max: n_max });
    }
    Ok(())
}

fn check_dims<T: Real>(w: &DMatrix<T>, grams: &GramSet<T>, gw: &GeodesicWeightMatrix<T>) -> Result<()> {
    let n = grams.len();
    for found in [w.nrows(), w.ncols(), gw.n()] {
        if found != n {
            return Err(Error::Dimension { expected: n, found });
        }
    }
    Ok(())
}

/// Column `i` is `Q_i w_i`.
fn quad_products<T: Real>(w: &DMatrix<T>, grams: &GramSet<T>) -> DMatrix<T> {
    let cols: Vec<DVector<T>> = (0..w.ncols())
        .into_par_iter()
        .map(|i| grams.get(i) * w.column(i))
        .collect();
    DMatrix::from_columns(&cols)
}

#[inline]
fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn weighted_l1<T: Real>(w: &DMatrix<T>, gw: &GeodesicWeightMatrix<T>) -> T {
    w.iter().zip(gw.weights().iter()).fold(T::zero(), |acc, (&v, &g)| acc + g * v.abs())
}

fn nuclear_norm<T: Real>(w: &DMatrix<T>) -> Result<T> {
    Ok(linalg::singular_values(w)?.sum())
}

/// `½ Σ w_iᵀQ_i w_i + λ‖W‖_* + ν Σ g_ji |W_ji|`.
pub fn objective<T: Real>(
    w: &CoefficientMatrix<T>,
    grams: &GramSet<T>,
    gw: &GeodesicWeightMatrix<T>,
    lambda: T,
    nu: T,
) -> Result<T> {
    let w = w.as_matrix();
    check_dims(w, grams, gw)?;
    let qw = quad_products(w, grams);
    Ok(smooth_quadratic(w, &qw) + lambda * nuclear_norm(w)? + nu * weighted_l1(w, gw))
}

fn smooth_quadratic<T: Real>(w: &DMatrix<T>, qw: &DMatrix<T>) -> T {
    w.dot(qw) * T::lit(0.5)
}

/// Linearization direction for the current state. Column `i` is
/// `Q_i w_i + ν s_i + (y_i + β(1ᵀw_i - 1))·1` with `(s_i)_j = g_ji sign(W_ji)`.
pub fn gradient<T: Real>(
    state: &SolverState<T>,
    grams: &GramSet<T>,
    gw: &GeodesicWeightMatrix<T>,
    nu: T,
) -> Result<DMatrix<T>> {
    check_dims(state.w.as_matrix(), grams, gw)?;
    let qw = quad_products(state.w.as_matrix(), grams);
    Ok(gradient_from_products(state, qw, gw, nu))
}

fn gradient_from_products<T: Real>(
    state: &SolverState<T>,
    mut g: DMatrix<T>,
    gw: &GeodesicWeightMatrix<T>,
    nu: T,
) -> DMatrix<T> {
    let w = state.w.as_matrix();
    let sums = state.w.column_sums();
    for i in 0..w.ncols() {
        let shift = state.y[i] + state.beta * (sums[i] - T::one());
        let mut col = g.column_mut(i);
        for j in 0..w.nrows() {
            col[j] += nu * gw.weights()[(j, i)] * sign(w[(j, i)]) + shift;
        }
    }
    g
}

/// Proximal operator of `τ‖·‖_*`: `U·max(Σ - τ, 0)·Vᵀ` for `A = UΣVᵀ`.
/// Also returns the thresholded singular values.
pub fn singular_value_threshold<T: Real>(a: &DMatrix<T>, tau: T) -> Result<(DMatrix<T>, DVector<T>)> {
    let linalg::Svd { u, s: values, v_t } = linalg::svd(a)?;
    let shrunk = values.map(|s| (s - tau).max(T::zero()));
    let mut us = u;
    for (k, s) in shrunk.iter().enumerate() {
        us.column_mut(k).scale_mut(*s);
    }
    Ok((us * v_t, shrunk))
}

/// `argmin_W (μ/2)‖W - (W_k - G/μ)‖_F² + λ‖W‖_*`, with the diagonal zeroed
/// afterwards when `forbid_diagonal` is set.
pub fn svt_step<T: Real>(
    state: &SolverState<T>,
    g: &DMatrix<T>,
    mu: T,
    lambda: T,
    forbid_diagonal: bool,
) -> Result<CoefficientMatrix<T>> {
    svt_step_with_values(state, g, mu, lambda, forbid_diagonal).map(|(w, _)| w)
}

fn svt_step_with_values<T: Real>(
    state: &SolverState<T>,
    g: &DMatrix<T>,
    mu: T,
    lambda: T,
    forbid_diagonal: bool,
) -> Result<(CoefficientMatrix<T>, Option<DVector<T>>)> {
    if !(mu > T::zero()) {
        return Err(Error::InvalidConfig(format!("mu must be positive, got {mu}")));
    }
    let a = state.w.as_matrix() - g / mu;
    let (mut w, shrunk) = singular_value_threshold(&a, lambda / mu)?;
    if forbid_diagonal {
        w.fill_diagonal(T::zero());
        return Ok((CoefficientMatrix::new(w)?, None));
    }
    Ok((CoefficientMatrix::new(w)?, Some(shrunk)))
}

/// Dual ascent `y_i += β(1ᵀw_i - 1)`, then `β = min(ρβ, β_max)`.
pub fn update_multipliers<T: Real>(state: &mut SolverState<T>, rho: T, beta_max: T) {
    let sums = state.w.column_sums();
    for (y, s) in state.y.iter_mut().zip(sums.iter()) {
        *y += state.beta * (*s - T::one());
    }
    state.beta = (rho * state.beta).min(beta_max);
    state.iter += 1;
}

fn rank_of<T: Real>(singular_values: &DVector<T>) -> usize {
    let top = singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if top <= T::zero() {
        return 0;
    }
    let cut = T::lit(RANK_TOL) * top;
    singular_values.iter().filter(|&&s| s > cut).count()
}

/// Builds the problem from sphere data and runs [`solve_problem`].
pub fn solve<T: Real>(data: &[SpherePoint<T>], config: &SolverConfig<T>) -> Result<Solution<T>> {
    config.validate()?;
    let problem = Problem::sphere(data, config.sigma, config.n_max)?;
    solve_problem(&problem, config)
}

/// Iterates until the column sums are within `eps` of one or `max_iters`
/// steps have run. At least one step is always taken.
pub fn solve_problem<T: Real>(problem: &Problem<T>, config: &SolverConfig<T>) -> Result<Solution<T>> {
    config.validate()?;
    let n = problem.n();
    check_size(n, config.n_max)?;
    let w0 = match &config.w_init {
        WInit::Uniform => CoefficientMatrix::uniform(n),
        WInit::Matrix(w) => {
            if w.n() != n {
                return Err(Error::Dimension { expected: n, found: w.n() });
            }
            w.clone()
        }
    };
    let (grams, gw) = (&problem.grams, &problem.weights);
    let mut state = SolverState::new(w0, config.beta0);
    let mut qw = quad_products(state.w.as_matrix(), grams);
    let mut trace = Vec::with_capacity(config.max_iters.min(4096));
    let mut converged = false;

    while state.iter < config.max_iters {
        let beta = state.beta;
        let mu = config.mu_rule.mu(beta, n, problem.lipschitz);
        let g = gradient_from_products(&state, qw, gw, config.nu);
        let (w, shrunk) = svt_step_with_values(&state, &g, mu, config.lambda, config.forbid_diagonal)?;
        state.w = w;
        update_multipliers(&mut state, config.rho, config.beta_max);

        let wm = state.w.as_matrix();
        qw = quad_products(wm, grams);
        let singular = match shrunk {
            Some(s) => s,
            None => linalg::singular_values(wm)?,
        };
        let violation = state.w.violation();
        let objective = smooth_quadratic(wm, &qw)
            + config.lambda * singular.sum()
            + config.nu * weighted_l1(wm, gw);
        trace.push(TraceRecord {
            iter: state.iter,
            objective,
            violation,
            rank: rank_of(&singular),
            beta,
            mu,
        });
        if violation < config.eps {
            converged = true;
            break;
        }
    }

    Ok(Solution { w: state.w, y: state.y, trace, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<SpherePoint<f64>> {
        (0..n)
            .map(|_| {
                let v = DVector::from_fn(dim, |_, _| rng.random_range(0.05..1.0));
                SpherePoint::normalize(v).unwrap()
            })
            .collect()
    }

    fn problem(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Problem<f64> {
        Problem::sphere(&random_points(rng, n, dim), 1.0, 2000).unwrap()
    }

    fn identical(n: usize) -> Problem<f64> {
        let x = SpherePoint::from_slice(&[0.6, 0.8]).unwrap();
        Problem::sphere(&vec![x; n], 1.0, 2000).unwrap()
    }

    #[test]
    fn objective_of_zero_matrix_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = problem(&mut rng, 4, 3);
        let f = objective(&CoefficientMatrix::zeros(4), &p.grams, &p.weights, 0.3, 0.2).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn objective_of_identity_on_identical_points() {
        let p = identical(5);
        let f = objective(&CoefficientMatrix::identity(5), &p.grams, &p.weights, 0.25, 1.0).unwrap();
        assert!((f - 0.25 * 5.0).abs() < 1e-12);
    }

    #[test]
    fn objective_term_by_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = problem(&mut rng, 3, 4);
        let w = random_matrix(&mut rng, 3, 3);
        let (lambda, nu) = (0.7, 0.3);
        let mut quad = 0.0;
        let mut l1 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    quad += 0.5 * w[(j, i)] * p.grams.get(i)[(j, k)] * w[(k, i)];
                }
                if j != i {
                    l1 += p.weights.weights()[(j, i)] * w[(j, i)].abs();
                }
            }
        }
        // Nuclear norm through the eigenvalues of WᵀW, independent of the SVD path.
        let nuc: f64 = w.tr_mul(&w).symmetric_eigen().eigenvalues.iter().map(|e| e.max(0.0).sqrt()).sum();
        let want = quad + lambda * nuc + nu * l1;
        let got = objective(&CoefficientMatrix::new(w).unwrap(), &p.grams, &p.weights, lambda, nu).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn objective_rejects_mismatched_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = problem(&mut rng, 4, 3);
        let err = objective(&CoefficientMatrix::zeros(3), &p.grams, &p.weights, 0.1, 0.1).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn gradient_at_feasible_uniform_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = problem(&mut rng, 5, 3);
        let state = SolverState::new(CoefficientMatrix::uniform(5), 3.0);
        let nu = 0.4;
        let g = gradient(&state, &p.grams, &p.weights, nu).unwrap();
        for i in 0..5 {
            let want = p.grams.get(i) * DVector::from_element(5, 0.2);
            for j in 0..5 {
                let s = if i == j { 0.0 } else { p.weights.weights()[(j, i)] };
                assert!((g[(j, i)] - want[j] - nu * s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_with_zero_grams_and_zero_w() {
        let p = identical(3);
        let mut state = SolverState::new(CoefficientMatrix::zeros(3), 0.5);
        state.y = DVector::from_vec(vec![1.0, -2.0, 0.25]);
        let g = gradient(&state, &p.grams, &p.weights, 0.7).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[(j, i)] - (state.y[i] - 0.5)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn svt_diagonal_example() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.2]));
        let (w, s) = singular_value_threshold(&a, 0.5).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![2.5, 0.5, 0.0]));
        assert!((w - want).amax() < 1e-14);
        assert_eq!(rank_of(&s), 2);
    }

    #[test]
    fn svt_with_zero_threshold_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 6, 6);
        let (w, _) = singular_value_threshold(&a, 0.0).unwrap();
        assert!((w - a).amax() < 1e-13);
    }

    #[test]
    fn svt_step_uses_lambda_over_mu_threshold() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.2]));
        let state = SolverState::new(CoefficientMatrix::new(a).unwrap(), 1.0);
        let zero = DMatrix::zeros(3, 3);
        let w = svt_step(&state, &zero, 4.0, 2.0, false).unwrap();
        assert!((w.as_matrix()[(0, 0)] - 2.5f64).abs() < 1e-14);
        let w = svt_step(&state, &zero, 4.0, 2.0, true).unwrap();
        assert!((0..3).all(|i| w.as_matrix()[(i, i)] == 0.0));
        assert!(svt_step(&state, &zero, 0.0, 2.0, false).is_err());
    }

    #[test]
    fn multiplier_update_examples() {
        let mut s = SolverState::new(CoefficientMatrix::<f64>::uniform(4), 2.0);
        s.y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        update_multipliers(&mut s, 1.1, 1e10);
        assert!((s.y - DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0])).amax() < 1e-15);
        assert!((s.beta - 2.2).abs() < 1e-15);
        assert_eq!(s.iter, 1);

        let mut s = SolverState::new(CoefficientMatrix::<f64>::zeros(3), 1e-6);
        update_multipliers(&mut s, 1.1, 1e10);
        assert!(s.y.iter().all(|&y| y == -1e-6));

        let mut s = SolverState::new(CoefficientMatrix::<f64>::zeros(3), 1e10);
        update_multipliers(&mut s, 1.1, 1e10);
        assert_eq!(s.beta, 1e10);
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::<f64>::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SolverConfig { rho: 1.0, ..ok.clone() },
            SolverConfig { beta0: 1e11, ..ok.clone() },
            SolverConfig { lambda: -1.0, ..ok.clone() },
            SolverConfig { sigma: 0.0, ..ok.clone() },
            SolverConfig { max_iters: 0, ..ok.clone() },
            SolverConfig { mu_rule: MuRule::Fixed(0.0), ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn identical_points_reach_feasibility() {
        let x = SpherePoint::from_slice(&[0.6, 0.8]).unwrap();
        let config = SolverConfig { lambda: 1e-3, ..Default::default() };
        let sol = solve(&[x.clone(), x], &config).unwrap();
        assert!(sol.converged);
        assert!(sol.w.column_sums().iter().all(|s: &f64| (s - 1.0).abs() < 1e-8));
    }

    #[test]
    fn single_iteration_cap_reports_not_converged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = random_points(&mut rng, 8, 4);
        let config = SolverConfig { max_iters: 1, ..Default::default() };
        let sol = solve(&data, &config).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.trace.len(), 1);
    }

    #[test]
    fn size_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = random_points(&mut rng, 5, 3);
        let config = SolverConfig { n_max: 4, ..Default::default() };
        assert!(matches!(solve(&data, &config), Err(Error::TooLarge { n: 5, max: 4 })));
        assert!(matches!(solve(&data[..1], &SolverConfig::default()), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn trace_is_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_points(&mut rng, 10, 4);
        let sol = solve(&data, &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.trace.len() <= 1000);
        for (k, rec) in sol.trace.iter().enumerate() {
            assert_eq!(rec.iter, k + 1);
            assert!(rec.objective.is_finite());
            assert!(rec.beta >= 1e-6 && rec.beta <= 1e10);
            if k > 0 {
                assert!(rec.beta >= sol.trace[k - 1].beta);
            }
        }
        assert!(sol.trace.last().unwrap().violation < 1e-8);
    }

    #[test]
    fn solves_in_single_precision() {
        let data: Vec<SpherePoint<f32>> = [[0.9f32, 0.1, 0.3], [0.8, 0.2, 0.4], [0.1, 0.9, 0.2], [0.2, 0.8, 0.1]]
            .iter()
            .map(|c| SpherePoint::normalize(DVector::from_column_slice(c)).unwrap())
            .collect();
        let config = SolverConfig::<f32> { eps: 1e-4, ..Default::default() };
        let sol = solve(&data, &config).unwrap();
        assert!(sol.converged);
        assert!(sol.w.violation() < 1e-4);
    }
}
