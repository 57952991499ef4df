//! Numerical toolkit for two-phase bidirectional relaying over
//! classical-quantum channels: Holevo quantities, typical-subspace
//! projectors, operator-inequality checks, capacity-region polygons, and
//! random codes with square-root decoders evaluated by exact traces.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod coding;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod lemmas;
pub mod random;
pub mod region;
pub mod typical;

pub use error::{Error, Result};
