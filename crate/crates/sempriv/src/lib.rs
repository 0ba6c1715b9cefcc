//! File-backed tooling around `sempriv-core`: config files, dataset loaders,
//! checkpoints, run directories, CSV reports, SVG plots and the CLI.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config_io;
pub mod datasets;
mod error;
pub mod plot;
pub mod report;
pub mod run;

pub use error::{Category, Error, Result};
pub use sempriv_core as core;
