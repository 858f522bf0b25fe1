//! Sparse temporal disaggregation of low-frequency series with
//! high-dimensional high-frequency indicators.

pub mod chowlin;
pub mod cli;
pub mod covariance;
pub mod disagg;
pub mod error;
pub mod gls;
pub mod lars;
pub mod linalg;
pub mod simlab;
pub mod sptd;

pub use error::{Error, ErrorCategory, Result};
