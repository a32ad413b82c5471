use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("geometry: {0}")]
    Geometry(String),

    /// The laser is on but no active element receives any intensity.
    #[error("laser at ({x:.6e}, {y:.6e}) illuminates no element at t = {time:.6e} s")]
    NoIllumination { x: f64, y: f64, time: f64 },

    #[error(
        "non-finite temperature in element {element} at step {step} (t = {time:.6e} s, dt = {dt:.3e} s): {detail}"
    )]
    Numerical {
        element: usize,
        step: usize,
        time: f64,
        dt: f64,
        detail: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
