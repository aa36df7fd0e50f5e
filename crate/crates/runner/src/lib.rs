//! Experiment recipes on top of `dnls-core`, with TOML configuration, JSON manifests
//! and CSV outputs. The `dnls-lab` binary is a thin front end over [`experiments::execute`].

pub mod config;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod manifest;

pub use config::{ExperimentConfig, InitialData, Overrides};
pub use error::{Result, RunError};
pub use manifest::{Check, Manifest};
