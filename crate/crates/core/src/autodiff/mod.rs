//! Reverse-mode automatic differentiation over dense 2-D tensors.

mod conv;
mod geom;
mod graph;
mod tensor;

pub use conv::Conv3dShape;
pub use geom::{MinMode, FK_STRIDE};
pub use graph::{Gradients, Graph, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("NotAScalarLoss: loss has shape {rows}x{cols}")]
    NotAScalarLoss { rows: usize, cols: usize },
    #[error("GraphCycle: node {0} depends on a later node")]
    GraphCycle(usize),
}
