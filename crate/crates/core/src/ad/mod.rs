//! Dense arrays with reverse-mode differentiation and a finite-difference oracle.

mod array;
mod fd;
mod params;
mod tape;

pub use array::Array;
pub use fd::{finite_diff_grad, relative_error, FdStep};
pub use params::{NamedArray, ParamStore};
pub use tape::{Bound, Gradients, Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum AdError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value in {op}: {detail}")]
    NonFinite { op: String, detail: String },
    #[error("expected a single-element root, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
}
