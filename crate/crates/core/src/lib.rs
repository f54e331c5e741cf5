//! Low-rank approximation of dense tensors by `(U^(1), ..., U^(k))·diag_k(λ)`
//! where the first `s` factor matrices have orthonormal columns and the rest
//! have unit columns.
//!
//! The solver alternates polar decompositions (with a proximal correction)
//! on the orthonormal modes and normalized least-squares updates on the
//! others, and drops components whose coefficient falls below a threshold.

pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod multistart;
pub mod problems;
pub mod report;
pub mod rng;
pub mod solver;
pub mod tensor;
pub mod tns;

pub use error::{Error, Result};
pub use solver::{solve, DiagonalCore, FactorSet, Kappa, SolveOutput, SolveStatus, SolverConfig};
pub use tensor::DenseTensor;
