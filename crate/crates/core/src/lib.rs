//! Numerical geometry of real hypersurfaces in complex hyperbolic space
//! whose Hopf vector field has two nontrivial principal projections.
//!
//! * [`model`]: `CH^n(c)` as a solvable Lie group with left-invariant metric.
//! * [`construction`]: constant Kähler angle subspaces and the ruled minimal
//!   submanifolds `W^{2n-k}_φ`.
//! * [`spectral`]: principal curvature catalog, germ classifier and the
//!   `c > 0` nonexistence scan.
//! * [`jacobi`]: Jacobi fields, focal matrices and tube shape operators.
//! * [`numlab`]: finite-difference hypersurface laboratory.
//! * [`sweep`]: radius sweeps of tube spectra.

pub mod construction;
pub mod error;
pub mod jacobi;
pub mod linalg;
pub mod model;
pub mod numlab;
pub mod ode;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{ModelParams, ModelSpace, Point, TangentVector};
