//! Multi-resolution β-divergence NMF.
//!
//! Two observations of the same nonnegative signal, one coarse along the first
//! dimension (`X ≈ R·W·H`) and one coarse along the second (`Y ≈ W·H·S`), are
//! factorized jointly so the recovered `W·H` has the fine resolution of both.

pub mod betadiv;
pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod operators;
pub mod rng;
pub mod solver;
pub mod synth;

pub use betadiv::{d_beta, d_beta_matrix, gamma_exponent, BetaParam};
pub use error::{Error, Result};
pub use matrix::{NonnegMatrix, EPS};
pub use operators::{SparseOperator, Structure};
pub use solver::{solve, CoupledProblem, FactorEstimate, SolverConfig};
