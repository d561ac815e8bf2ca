//! Structured periodic spacetime meshes, nodal basis, element matrices.

pub mod basis;
pub mod element;
pub mod mesh;
pub mod quadrature;

use thiserror::Error;

pub use basis::{basis_eval, basis_grad, BasisGrad};
pub use element::{element_matrices, ElementMatrices, LocalMatrix};
pub use mesh::{Dims, MeshSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscretizationError {
    #[error("basis index {index} out of range 1..={count}")]
    BasisIndex { index: usize, count: usize },
    #[error("time index {it} out of range (nt = {nt})")]
    TimeIndexOutOfRange { it: usize, nt: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
}
