//! Simulation harness, experiment drivers, configuration and file formats
//! for CSI-free remote state estimation with semantic analog aggregation.

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod io;

pub use error::{Result, SimError};
