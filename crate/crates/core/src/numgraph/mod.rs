//! Dense-matrix reverse-mode automatic differentiation.
//!
//! A [`Tape`] records operations on [`Tensor`] handles as they execute; a
//! single [`Tape::backward`] sweep then fills in gradients. Values live in
//! plain [`Matrix`] buffers that can be moved between threads, while tapes
//! are built and consumed on one thread. Every op checks its output for
//! NaN/Inf when debug assertions are enabled.

mod adam;
mod gradcheck;
mod matrix;
mod tape;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, grad_check_many, central_difference};
pub use matrix::Matrix;
pub use tape::{Tape, Tensor};

pub(crate) use tape::sigmoid;

#[cfg(test)]
mod tests;
