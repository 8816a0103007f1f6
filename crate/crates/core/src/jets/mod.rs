//! Truncated multivariate Taylor series ("jets") and 2×2 matrices of them.

mod layout;
mod matrix;
mod series;

pub use layout::{layout, Layout};
pub use matrix::{compose3, Jet, SeriesMatrix2};
pub use series::{Series, Vars};
