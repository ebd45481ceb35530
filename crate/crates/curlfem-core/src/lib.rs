//! High-order H(curl)-conforming finite elements for the time-harmonic
//! Maxwell system with impedance boundary conditions, together with the
//! convergence and stability diagnostics used by the study harness.
//!
//! Module map:
//! - [`mesh`]: benchmark geometries, Kuhn subdivision, red refinement.
//! - [`quadrature`]: simplex rules exact to requested degree.
//! - [`fespace`]: Nédélec/scalar hierarchic bases, dof maps, discrete gradient.
//! - [`assembly`]: system matrix blocks, manufactured cases, loads, PEC.
//! - [`linalg`]: complex-symmetric sparse direct/iterative solvers.
//! - [`analysis`]: error norms, best approximation, inf-sup, consistency.
//! - [`study`]: batch study runner, CSV and SVG reporting.

pub mod assembly;
pub mod error;
pub mod fespace;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64;
