//! Path-independent multi-parameter flow matching on point clouds.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod geometry;

pub use error::{Error, Result};
pub mod transport;
pub mod field;
pub mod training;
pub mod inference;
pub mod analytics;
