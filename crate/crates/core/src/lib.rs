//! Double-sparse multi-frame super resolution.
//!
//! A target low-resolution patch and its matched auxiliary patches are coded
//! jointly against a stacked dictionary whose auxiliary blocks are non-negative
//! combinations of integer-shift base dictionaries. Shift weights and sparse
//! codes are estimated by alternating a small constrained QP with lasso
//! coding.

pub mod cli;
pub mod config;
pub mod degradation;
pub mod dictfile;
pub mod double_sparse;
pub mod error;
pub mod image_core;
pub mod pipeline;
pub mod registration;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
