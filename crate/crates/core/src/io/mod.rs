//! Configuration, CSV and SVG output, and parameter sweeps for the CLI.

pub mod chart;
pub mod config;
pub mod sweep;
pub mod table;

use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub use chart::{emit_chart, render_chart};
pub use config::{
    parse_config, preset_config_json, ConfigError, OutputConfig, RunConfig, DEFAULT_PRECISION,
};
pub use sweep::{
    emit_sweep, run_sweep, write_sweep_csv, SweepRow, SweepSpec, SweepTarget, SWEEP_HEADER,
};
pub use table::{emit_csv, format_sig, write_trajectory_csv, TRAJECTORY_HEADER};

/// An I/O failure tied to the path being written.
#[derive(Debug, Error)]
#[error("cannot write `{}`: {source}", path.display())]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

impl OutputError {
    pub fn new(path: &Path, source: io::Error) -> Self {
        OutputError {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Fails early when `path` cannot be created: missing or read-only parent, or a directory in the way.
pub fn check_writable(path: &Path) -> Result<(), OutputError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let meta = parent.metadata().map_err(|e| OutputError::new(path, e))?;
    if !meta.is_dir() {
        return Err(OutputError::new(
            path,
            io::Error::new(io::ErrorKind::NotFound, "parent is not a directory"),
        ));
    }
    if meta.permissions().readonly() {
        return Err(OutputError::new(
            path,
            io::Error::new(
                io::ErrorKind::PermissionDenied,
                "parent directory is read-only",
            ),
        ));
    }
    if path.is_dir() {
        return Err(OutputError::new(
            path,
            io::Error::new(io::ErrorKind::InvalidInput, "path is a directory"),
        ));
    }
    Ok(())
}
