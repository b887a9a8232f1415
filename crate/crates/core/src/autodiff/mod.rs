//! A small dense tensor engine with define-by-run reverse-mode
//! differentiation, 64-bit throughout.
//!
//! Values live on a [`Tape`]; every op records its inputs and enough cached
//! state to run its backward rule. [`Tape::backward`] consumes the tape and
//! returns the gradients of the leaves that asked for them.

mod adamw;
mod kernels;
mod serialize;
mod tape;
mod tensor;

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use serialize::{decode_tensors, encode_tensors, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
