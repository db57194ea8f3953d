//! Configuration, gallery and orchestration behind the `rcpl` binary.

pub mod config;
pub mod gallery;
pub mod json;
pub mod run;

use std::path::PathBuf;

pub use config::{load_config, parse_config, RunConfig, Task};
pub use run::{run, Report, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config error{}: {message}", if path.is_empty() { String::new() } else { format!(" at `{path}`") })]
    Config { path: String, message: String },
    #[error("unknown gallery entry `{0}` (available: {names})", names = gallery::NAMES.join(", "))]
    UnknownGallery(String),
    #[error("cannot write report: {0}")]
    Output(String),
}
