//! Numerical toolkit for decoherence, relative states and information gain.
//!
//! Units: ħ = 1 and k_B = 1 throughout; entropies are in nats unless a
//! function name says otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grw;
pub mod chain;
pub mod dem;
pub mod energetics;
pub mod linalg;
pub mod random;
pub mod relstate;
pub mod state;
pub mod thermo;

pub use error::{Error, Result};
