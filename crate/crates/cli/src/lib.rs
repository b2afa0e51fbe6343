//! Command-line front end: resumable parameter sweeps with versioned CSV
//! outputs, scaling collapses, KL comparisons and one-off probes.

pub mod collapse;
pub mod error;
pub mod kl;
pub mod manifest;
pub mod plot;
pub mod probe;
pub mod spec;
pub mod sweep;
pub mod table;

pub use error::{CliError, Result};
