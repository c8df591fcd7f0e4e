//! Dense `f64` matrices with a small reverse-mode autodiff core.

mod gradcheck;
mod graph;
mod linalg;
mod matrix;
mod rng;

pub use gradcheck::{grad_check, grad_check_entries, GRAD_CHECK_STEP};
pub use graph::{Graph, NodeId, IGNORE_TARGET};
pub use linalg::least_squares;
pub use matrix::Matrix;
pub use rng::RngSeed;


#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: incompatible shapes {}x{} and {}x{}", .left.0, .left.1, .right.0, .right.1)]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("backward root must be 1x1, got {0}x{1}")]
    NonScalarRoot(usize, usize),
    #[error("{0}")]
    InvalidArgument(String),
}

impl NumericsError {
    pub(crate) fn shape(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Self::ShapeMismatch { op, left, right }
    }
}

#[cfg(test)]
mod tests;
