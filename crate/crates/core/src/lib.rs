//! Numerical laboratory for the bounded law of the iterated logarithm of
//! canonical U-statistics of order 2.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernel`]: kernels, input distributions, counter-based sample streams
//!   and the analytic catalog.
//! - [`hoeffding`]: Hoeffding projections and exact evaluation of the four
//!   U-statistic sum variants.
//! - [`chaos_norm`]: the t-parameterised chaos norm of a matrix, computed by
//!   alternating box/ball maximisation.
//! - [`conditions`]: certifiers for canonicality, the truncated second
//!   moment growth and the L2 operator norm, plus truncation diagnostics.
//! - [`tail_bounds`]: Talagrand, Prohorov and Bernstein bound calculators and
//!   an empirical checker for the chaos lower tail bound.
//! - [`simulator`]: Monte Carlo trajectories at dyadic checkpoints, limsup
//!   and limit-set estimation.
//! - [`cli`]: the `ulil` command-line front end.

pub mod chaos_norm;
pub mod cli;
pub mod conditions;
pub mod error;
pub mod hoeffding;
pub mod kernel;
pub mod linalg;
pub mod numeric;
pub mod simulator;
pub mod tail_bounds;

pub use error::{Error, Result};
