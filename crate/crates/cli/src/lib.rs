//! Batch front end for `ppcat-core`: run manifests, experiment drivers and
//! the output formats they write.

pub mod config;
pub mod error;
pub mod experiments;
pub mod format;

pub use config::{Config, Experiment, Overrides, RunManifest, FORMAT_VERSION};
pub use error::CliError;
pub use experiments::run;
