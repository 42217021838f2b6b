//! Experiment runner for the coupled particle / kinetic study: configuration,
//! trial orchestration, rate fitting, oracles, and CSV/SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod config;
pub mod error;
pub mod fit;
pub mod oracle;
pub mod report;
pub mod runner;
pub mod tables;

pub use config::{ExperimentConfig, KineticConfig};
pub use error::{LabError, Result};
pub use fit::{fit_rate, RateFit};
