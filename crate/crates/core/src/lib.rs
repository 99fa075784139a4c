//! Low-rank representation of points on the unit sphere, with the feature
//! extraction, spectral clustering and nearest-neighbour tools around it.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod clustering;
pub mod error;
pub mod features;
pub mod geometry;
pub mod gram;
pub mod io;
pub mod linalg;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod scalar;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SpherePointF64 = geometry::SpherePoint<f64>;
pub type SpherePointF32 = geometry::SpherePoint<f32>;
pub type TangentVectorF64 = geometry::TangentVector<f64>;
pub type TangentVectorF32 = geometry::TangentVector<f32>;
pub type CoefficientMatrixF64 = solver::CoefficientMatrix<f64>;
pub type CoefficientMatrixF32 = solver::CoefficientMatrix<f32>;
pub type SolverConfigF64 = solver::SolverConfig<f64>;
pub type SolverConfigF32 = solver::SolverConfig<f32>;
pub type SolutionF64 = solver::Solution<f64>;
pub type SolutionF32 = solver::Solution<f32>;
pub type ProblemF64 = solver::Problem<f64>;
pub type ProblemF32 = solver::Problem<f32>;
pub type AffinityF64 = clustering::Affinity<f64>;
pub type AffinityF32 = clustering::Affinity<f32>;
pub type LabeledSphereSetF64 = classify::LabeledSphereSet<f64>;
pub type LabeledSphereSetF32 = classify::LabeledSphereSet<f32>;
