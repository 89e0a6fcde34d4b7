//! Spectral numerics for the hyperbolic Anderson model driven by Gaussian
//! noise that is colored in time and space.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos_moments;
pub mod cli;
pub mod conditions;
pub mod covariance;
pub mod error;
pub mod field_sim;
pub mod increments;
pub mod quad;
pub mod wave_kernel;

pub use error::{HamError, Result};
