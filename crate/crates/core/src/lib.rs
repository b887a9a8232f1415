//! ECG preprocessing and delineation, a from-scratch 1D vision transformer
//! with reverse-mode autodiff, and class-token attention attribution onto
//! physiological ECG intervals.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod data_io;
pub mod delineation;
pub mod error;
pub mod explain;
pub mod signal;
pub mod training;
pub mod vit;

pub use error::{Error, Result};
