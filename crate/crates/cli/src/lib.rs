//! Front end for the gas cost laboratory: simulation runs, analysis
//! bundles, SVG figures and fee economics.
//!
//! Every command writes its files atomically and records a `manifest.json`
//! with input and output hashes. Exit codes: 0 success, 2 input error,
//! 3 I/O error.

pub mod analyze;
pub mod cli;
pub mod economics;
pub mod error;
pub mod output;
pub mod plot;
pub mod simulate;
pub mod svg;

pub use error::CliError;
