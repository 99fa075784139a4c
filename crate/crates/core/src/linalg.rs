//! Singular value decompositions with a posteriori checks.
//!
//! Decompositions come from faer, computed in `f64`. Every result is checked
//! against its input. nalgebra's implicit-shift SVD is the fallback, retried
//! with several deflation thresholds, on the transpose and after a QR step;
//! on its own it can lose accuracy on rank-deficient or ill-conditioned input.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Thin SVD `a = u · diag(s) · v_t`.
#[derive(Debug, Clone)]
pub struct Svd<T: Real> {
    pub u: DMatrix<T>,
    pub s: DVector<T>,
    pub v_t: DMatrix<T>,
}

fn tolerance<T: Real>(a: &DMatrix<T>) -> T {
    let dim = T::lit(a.nrows().max(a.ncols()).max(1) as f64);
    T::tol(1e-12) * dim * a.norm()
}

/// Deflation thresholds tried in turn, as multiples of machine epsilon.
const EPS_MULTIPLES: [f64; 4] = [1.0, 5.0, 100.0, 1e4];

fn raw_svd<T: Real>(a: &DMatrix<T>, eps: T) -> Option<Svd<T>> {
    let svd = a.clone().try_svd(true, true, eps, 0)?;
    Some(Svd { u: svd.u?, s: svd.singular_values, v_t: svd.v_t? })
}

fn reproduces<T: Real>(svd: &Svd<T>, a: &DMatrix<T>) -> bool {
    let mut us = svd.u.clone();
    for (k, s) in svd.s.iter().enumerate() {
        us.column_mut(k).scale_mut(*s);
    }
    let err = (us * &svd.v_t - a).norm();
    err.is_finite() && err <= tolerance(a)
}

fn faer_svd<T: Real>(a: &DMatrix<T>) -> Option<Svd<T>> {
    let (r, c) = a.shape();
    let m = faer::Mat::<f64>::from_fn(r, c, |i, j| a[(i, j)].to_f64().unwrap_or(f64::NAN));
    let svd = m.thin_svd().ok()?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let k = s.nrows();
    Some(Svd {
        u: DMatrix::from_fn(r, k, |i, j| T::lit(u[(i, j)])),
        s: DVector::from_fn(k, |i, _| T::lit(s[i])),
        v_t: DMatrix::from_fn(k, c, |i, j| T::lit(v[(j, i)])),
    })
}

/// Verified thin SVD of `a`, singular values in descending order.
pub fn svd<T: Real>(a: &DMatrix<T>) -> Result<Svd<T>> {
    if let Some(svd) = faer_svd(a).filter(|s| reproduces(s, a)) {
        return Ok(svd);
    }
    let at = a.transpose();
    for k in EPS_MULTIPLES {
        let eps = T::EPSILON * T::lit(k);
        if let Some(svd) = raw_svd(a, eps).filter(|s| reproduces(s, a)) {
            return Ok(svd);
        }
        if let Some(f) = raw_svd(&at, eps).filter(|s| reproduces(s, &at)) {
            return Ok(Svd { u: f.v_t.transpose(), s: f.s, v_t: f.u.transpose() });
        }
    }
    qr_svd(a).or_else(|| qr_svd(&at).map(|f| Svd { u: f.v_t.transpose(), s: f.s, v_t: f.u.transpose() })).ok_or(Error::SvdFailure)
}

/// Preconditioned attempt: `a = QR`, then the SVD of the square factor.
fn qr_svd<T: Real>(a: &DMatrix<T>) -> Option<Svd<T>> {
    if a.nrows() < a.ncols() {
        return None;
    }
    let (q, r) = a.clone().qr().unpack();
    EPS_MULTIPLES.iter().find_map(|&k| {
        let f = raw_svd(&r, T::EPSILON * T::lit(k)).filter(|f| reproduces(f, &r))?;
        let svd = Svd { u: &q * f.u, s: f.s, v_t: f.v_t };
        reproduces(&svd, a).then_some(svd)
    })
}

/// Singular values of `a`, from a verified decomposition.
pub fn singular_values<T: Real>(a: &DMatrix<T>) -> Result<DVector<T>> {
    svd(a).map(|d| d.s)
}
