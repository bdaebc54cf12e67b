//! Application-provider / transport-provider market model.
//!
//! APs pick the transport segment that maximizes `alpha * (v - p) * exp(-beta * q)`;
//! segments price so their carried load fits their effective capacity. The
//! crate computes the resulting competitive prices, sweeps them over system
//! parameters and projects a calibrated transit/CDN market year by year.

// `!(x > y)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod choice;
pub mod cli;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod evolution;
pub mod model;
pub mod quality;
pub mod scaling;
pub mod sweep;

pub use error::{ModelError, Result};
