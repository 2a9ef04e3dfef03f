//! Dense f64 tensors, a tape-based reverse-mode autodiff engine, and the
//! small amount of linear algebra the models in this workspace need.
//!
//! Everything is 64-bit. Tapes are single-owner: build a graph, read values
//! with [`Tape::forward_eval`], pull gradients with [`Tape::backward_grad`].
//! Distinct tapes are independent and may live on distinct threads.

mod error;
mod fd;
mod linalg;
mod tape;
mod tensor;
mod var;

pub use error::NumkitError;
pub use fd::{finite_difference_grad, finite_difference_jacobian};
pub use linalg::invert_small_matrix;
pub use tape::{GradMap, NodeId, Op, Tape};
pub use tensor::Tensor;
pub use var::Var;
