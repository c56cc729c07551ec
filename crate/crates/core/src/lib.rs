//! Multi-modes Monte Carlo finite element method for elliptic problems with
//! weakly perturbed random coefficients `a0(x) + ε η(ω, x)`.
//!
//! The solution is expanded as `u = Σ ε^n u_n`, where every mode solves a
//! problem with the same deterministic operator `−∇·(a0 ∇)`. The stiffness
//! matrix is factored once and every mode of every sample is obtained by
//! triangular substitution.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod experiments;
pub mod field;
pub mod mesh;
pub mod quadrature;
pub mod random_fields;
pub mod solver;
pub mod sparse;
pub mod sparse_direct;

pub use error::{Error, Result};
pub use field::{FieldVector, GradientField, ScalarField};
pub use mesh::{build_mesh_1d, build_mesh_2d, Domain, Mesh};
pub use sparse_direct::{Factorization, OpCounters};
