//! Numeric core: dense tensors, a dynamic reverse-mode autodiff graph, LSTM cells,
//! stack-LSTMs and SGD. Everything is `f64`.

mod graph;
mod lstm;
mod params;
mod sgd;
mod tensor;

pub use graph::{Expr, Graph};
pub use lstm::{LstmParams, LstmState, StackLstm};
pub use params::{Gradients, ParamId, ParamStore, Parameter};
pub use sgd::Sgd;
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{what}: expected dimension {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("backward already ran on this graph")]
    BackwardTwice,
}
