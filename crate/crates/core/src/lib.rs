//! Adapted charts, obstruction polynomials and numerical checks for
//! Beltrami fields `curl u = f u`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod cli;
pub mod coeff;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod families;
pub mod fields;
pub mod jets;
pub mod obstruction;
pub mod oracle;
pub mod sampling;

pub use error::{Error, Result};
