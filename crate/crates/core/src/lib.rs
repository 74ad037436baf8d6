//! Construction and verification of matrix differential intertwining
//! operators between Schrödinger Hamiltonians `-I d^2/dx^2 + V(x)`.

// `!(r <= tol)` rejects NaN residuals.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod builder;
pub mod chains;
pub mod diffop;
pub mod error;
pub mod factor;
pub mod jets;
pub mod pipeline;
pub mod scenario;
pub mod susy;
pub mod verify;

pub use error::{Error, Result};
