//! Synthetic sphere datasets with planted clusters.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::classify::LabeledSphereSet;
use crate::error::{Error, Result};
use crate::geometry::{self, SpherePoint, TangentVector};
use crate::scalar::Real;

/// Rejection-sampling budget for placing centroids.
pub const MAX_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Number of clusters.
    pub k: usize,
    /// Points per cluster.
    pub n_per: usize,
    /// Sphere dimension; points live in `R^{m+1}`.
    pub m: usize,
    /// Per-axis standard deviation of the tangent displacement, in radians.
    pub spread: f64,
    /// Minimum pairwise geodesic distance between centroids, in radians.
    pub min_sep: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k * self.n_per < 2 {
            return Err(Error::InvalidConfig(format!(
                "need k >= 1 and k * n_per >= 2, got k = {} and n_per = {}",
                self.k, self.n_per
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("sphere dimension m must be positive".into()));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::InvalidConfig(format!("spread must be nonnegative, got {}", self.spread)));
        }
        if !(self.min_sep >= 0.0 && self.min_sep.is_finite()) {
            return Err(Error::InvalidConfig(format!("min_sep must be nonnegative, got {}", self.min_sep)));
        }
        Ok(())
    }

    /// Human-readable notes about specs likely to produce overlapping clusters.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.k > 1 && self.spread >= self.min_sep / 2.0 {
            out.push(format!(
                "spread {} is not below min_sep / 2 = {}; clusters may overlap",
                self.spread,
                self.min_sep / 2.0
            ));
        }
        out
    }
}

fn normal_vector(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

fn centroids(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Vec<SpherePoint<f64>>> {
    let dim = spec.m + 1;
    let mut out: Vec<SpherePoint<f64>> = Vec::with_capacity(spec.k);
    let mut attempts = 0;
    while out.len() < spec.k {
        if attempts == MAX_ATTEMPTS {
            return Err(Error::SeparationUnsatisfiable {
                k: spec.k,
                min_sep: spec.min_sep,
                attempts,
            });
        }
        attempts += 1;
        let v = normal_vector(rng, dim, 1.0).map(f64::abs);
        let Ok(c) = SpherePoint::normalize(v) else { continue };
        if out.iter().all(|o| geometry::geodesic_distance(o, &c) >= spec.min_sep) {
            out.push(c);
        }
    }
    Ok(out)
}

/// Draws `k` well-separated centroids in the nonnegative orthant and
/// scatters `n_per` points around each through the exponential map of a
/// Gaussian tangent vector. Points are ordered cluster by cluster.
pub fn generate<T: Real>(spec: &SynthSpec) -> Result<LabeledSphereSet<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = centroids(spec, &mut rng)?;
    let mut points = Vec::with_capacity(spec.k * spec.n_per);
    let mut labels = Vec::with_capacity(spec.k * spec.n_per);
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..spec.n_per {
            let p = if spec.spread == 0.0 {
                c.clone()
            } else {
                let ambient = normal_vector(&mut rng, c.dim(), spec.spread);
                geometry::exp_map(&TangentVector::project(c.clone(), &ambient)?)
            };
            points.push(SpherePoint::normalize(p.into_coords().map(T::lit))?);
            labels.push(label);
        }
    }
    LabeledSphereSet::new(points, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SynthSpec {
        SynthSpec { k: 3, n_per: 30, m: 9, spread: 0.05, min_sep: 0.8, seed: 11 }
    }

    #[test]
    fn zero_spread_repeats_centroids() {
        let s = SynthSpec { spread: 0.0, n_per: 4, ..spec() };
        let set = generate::<f64>(&s).unwrap();
        for chunk in set.points().chunks(4) {
            assert!(chunk.iter().all(|p| p == &chunk[0]));
        }
    }

    #[test]
    fn single_cluster_labels() {
        let set = generate::<f64>(&SynthSpec { k: 1, ..spec() }).unwrap();
        assert!(set.labels().iter().all(|&l| l == 0));
        assert_eq!(set.len(), 30);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate::<f64>(&spec()).unwrap();
        let b = generate::<f64>(&spec()).unwrap();
        assert_eq!(a, b);
        let c = generate::<f64>(&SynthSpec { seed: 12, ..spec() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn within_and_across_distances() {
        let set = generate::<f64>(&spec()).unwrap();
        let (mut within, mut across) = (Vec::new(), Vec::new());
        let pts = set.points();
        for i in 0..pts.len() {
            assert!((pts[i].coords().norm() - 1.0).abs() < 1e-10);
            for j in (i + 1)..pts.len() {
                let d = geometry::geodesic_distance(&pts[i], &pts[j]);
                if set.labels()[i] == set.labels()[j] {
                    within.push(d);
                } else {
                    across.push(d);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        // Two independent tangent draws differ by about spread * sqrt(2m).
        let expected = 0.05 * (2.0 * 9.0f64).sqrt();
        assert!((mean(&within) - expected).abs() < 0.25 * expected, "within {}", mean(&within));
        assert!(mean(&across) > 0.6, "across {}", mean(&across));
        let median = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        assert!(median(&mut within) < median(&mut across));
    }

    #[test]
    fn impossible_separation_is_reported() {
        let s = SynthSpec { k: 4, m: 1, min_sep: 1.6, ..spec() };
        assert!(matches!(generate::<f64>(&s), Err(Error::SeparationUnsatisfiable { .. })));
    }

    #[test]
    fn warns_on_large_spread() {
        assert!(spec().warnings().is_empty());
        assert_eq!(SynthSpec { spread: 0.5, ..spec() }.warnings().len(), 1);
    }
}
