//! Multilayer bootstrap networks (MBN), the MBN-E ensemble with a shared
//! bottom layer, and unsupervised selection of its base models.

// Negated comparisons like `!(x > 0.0)` are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod divergence;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod matrix;
pub mod network;
pub mod reduction;
pub mod rng;
pub mod selection;
pub mod validity;

pub use error::{MbnError, Result};
