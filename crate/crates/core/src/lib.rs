//! Geometry, weights, wave solvers, estimate evaluation and HUM control for
//! wave equations on domains with moving timelike boundaries.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod estimates;
pub mod expr;
pub mod geometry;
pub mod grid;
pub mod hum;
pub mod regions;
pub mod rng;
pub mod wavesolver;
pub mod weights;

pub use error::{Error, Result};
