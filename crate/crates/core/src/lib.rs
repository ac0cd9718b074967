//! Travel-time inverse problems on simple Riemannian metrics of the closed
//! unit disc.
//!
//! The crate forward-simulates travel time data, travel time difference data
//! and broken scattering relations for a metric model, and reconstructs the
//! interior geometry from them up to isometry.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geodesic;
pub mod inversion;
pub mod linalg;
pub mod metric;
pub mod report;
pub mod survey;

pub use error::{Error, Result};
