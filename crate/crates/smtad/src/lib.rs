//! File formats, experiment orchestration and the `smtad` command line on top
//! of [`smtad_core`].

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod export;
pub mod model_file;
pub mod sweep;

pub use error::{CliError, Result};
