//! Slow reference computations used to check the fast paths in tests.
//!
//! Nothing here shares code with the routines it verifies beyond the data
//! structures: the subgradient solver, the prox optimality test and the
//! brute-force assignment are independent derivations.

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::solver::Problem;

/// Objective value and a subgradient, from one SVD.
fn objective_and_subgradient(problem: &Problem<f64>, w: &DMatrix<f64>, lambda: f64, nu: f64) -> (f64, DMatrix<f64>) {
    let n = w.ncols();
    let mut quad = 0.0;
    let mut sub = DMatrix::zeros(n, n);
    for i in 0..n {
        let qw = problem.grams.get(i) * w.column(i);
        quad += 0.5 * w.column(i).dot(&qw);
        sub.set_column(i, &qw);
    }
    let linalg::Svd { u, s: values, v_t } = linalg::svd(w).expect("svd");
    let top = values.max();
    let mut nuc = 0.0;
    for (k, &s) in values.iter().enumerate() {
        nuc += s;
        if s > 1e-12 * top.max(1e-300) {
            sub += (u.column(k) * v_t.row(k)) * lambda;
        }
    }
    let g = problem.weights.weights();
    let mut l1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = w[(j, i)];
            l1 += g[(j, i)] * v.abs();
            if v != 0.0 {
                sub[(j, i)] += nu * g[(j, i)] * v.signum();
            }
        }
    }
    (quad + lambda * nuc + nu * l1, sub)
}

/// Unconstrained objective `½Σ wᵢᵀQᵢwᵢ + λ‖W‖_* + νΣ g|W|`, by direct loops.
pub fn objective(problem: &Problem<f64>, w: &DMatrix<f64>, lambda: f64, nu: f64) -> f64 {
    objective_and_subgradient(problem, w, lambda, nu).0
}

/// Projects each column of `d` onto `{v : 1ᵀv = 0}`.
fn project_direction(d: &mut DMatrix<f64>) {
    let n = d.nrows() as f64;
    for mut col in d.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

/// Projected subgradient descent on the column-sum-constrained problem.
///
/// Starts from the feasible uniform matrix, takes normalized steps of length
/// `step0 / sqrt(k + 1)` and returns the best objective seen with its iterate.
pub fn projected_subgradient(
    problem: &Problem<f64>,
    lambda: f64,
    nu: f64,
    iters: usize,
    step0: f64,
) -> (f64, DMatrix<f64>) {
    let n = problem.n();
    let mut w = DMatrix::from_element(n, n, 1.0 / n as f64);
    let mut best = (f64::INFINITY, w.clone());
    for k in 0..iters {
        let (f, mut d) = objective_and_subgradient(problem, &w, lambda, nu);
        if f < best.0 {
            best = (f, w.clone());
        }
        project_direction(&mut d);
        let norm = d.norm();
        if norm == 0.0 {
            break;
        }
        w -= d * (step0 / ((k + 1) as f64).sqrt() / norm);
    }
    best
}

/// Residual of the optimality conditions of `W = argmin ½‖X - A‖² + τ‖X‖_*`.
///
/// With `W = U_r S V_rᵀ` (rank `r`), optimality means
/// `A - W = τ(U_r V_rᵀ + Z)` with `U_rᵀZ = 0`, `Z V_r = 0`, `‖Z‖₂ ≤ 1`.
/// Returns the largest violation of those conditions, scaled by `τ`.
pub fn nuclear_prox_residual(a: &DMatrix<f64>, w: &DMatrix<f64>, tau: f64) -> f64 {
    let g = a - w;
    if tau == 0.0 {
        return g.amax();
    }
    let linalg::Svd { u, s: values, v_t } = linalg::svd(w).expect("svd");
    let top = values.max();
    let keep: Vec<usize> = (0..values.len())
        .filter(|&k| values[k] > 1e-9 * top.max(1.0))
        .collect();
    let m = &g / tau;
    if keep.is_empty() {
        let norm2 = spectral_norm(&m);
        return tau * (norm2 - 1.0).max(0.0);
    }
    let ur = DMatrix::from_columns(&keep.iter().map(|&k| u.column(k).into_owned()).collect::<Vec<_>>());
    let vr = DMatrix::from_columns(&keep.iter().map(|&k| v_t.row(k).transpose()).collect::<Vec<_>>());
    let r1 = (ur.transpose() * &m - vr.transpose()).amax();
    let r2 = (&m * &vr - &ur).amax();
    let (rows, cols) = (m.nrows(), m.ncols());
    let pu = DMatrix::identity(rows, rows) - &ur * ur.transpose();
    let pv = DMatrix::identity(cols, cols) - &vr * vr.transpose();
    let z = pu * &m * pv;
    let r3 = (spectral_norm(&z) - 1.0).max(0.0);
    tau * r1.max(r2).max(r3)
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    linalg::singular_values(m).expect("svd").max()
}

/// `½‖X - A‖_F² + τ‖X‖_*`, via singular values.
pub fn prox_objective(x: &DMatrix<f64>, a: &DMatrix<f64>, tau: f64) -> f64 {
    0.5 * (x - a).norm_squared() + tau * linalg::singular_values(x).expect("svd").sum()
}

/// Best label agreement over all bijections between cluster ids, by
/// enumerating permutations. Only for small `k`.
pub fn brute_force_accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    let k = pred.iter().chain(truth).copied().max().map_or(0, |m| m + 1);
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut perm, 0, &mut |p| {
        let hits = pred.iter().zip(truth).filter(|(a, b)| p[**a] == **b).count();
        best = best.max(hits);
    });
    best as f64 / pred.len().max(1) as f64
}

fn permute(perm: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == perm.len() {
        visit(perm);
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        permute(perm, start + 1, visit);
        perm.swap(start, i);
    }
}

/// Central finite difference of `f` at `x` along `dir`.
pub fn directional_derivative(f: impl Fn(&DMatrix<f64>) -> f64, x: &DMatrix<f64>, dir: &DMatrix<f64>, h: f64) -> f64 {
    (f(&(x + dir * h)) - f(&(x - dir * h))) / (2.0 * h)
}

/// The smooth part of the linearized function: quadratic, multiplier and
/// penalty terms, evaluated by explicit sums.
pub fn smooth_lagrangian(problem: &Problem<f64>, w: &DMatrix<f64>, y: &DVector<f64>, beta: f64) -> f64 {
    let n = w.ncols();
    let mut total = 0.0;
    for i in 0..n {
        let q = problem.grams.get(i);
        let mut quad = 0.0;
        for j in 0..n {
            for k in 0..n {
                quad += w[(j, i)] * q[(j, k)] * w[(k, i)];
            }
        }
        let slack: f64 = (0..n).map(|j| w[(j, i)]).sum::<f64>() - 1.0;
        total += 0.5 * quad + y[i] * slack + 0.5 * beta * slack * slack;
    }
    total
}
