//! Newton iteration and the sparse direct solver behind it.

pub mod lu;
pub mod multifrontal;
pub mod newton;

use thiserror::Error;

pub use lu::{lu_solve, LuSolver};
pub use newton::{newton_solve, newton_solve_with, FailureReason, LineSearch, NewtonOptions, NewtonReport};

use crate::assembly::AssemblyError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("vector or matrix size does not match the pattern")]
    SizeMismatch,
    #[error("factorization needs about {needed} bytes but only {available} are available")]
    InsufficientMemory { needed: usize, available: usize },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}
