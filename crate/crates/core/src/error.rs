use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("integration diverged; last finite state at t = {last_good_t:e} s")]
    IntegrationDiverged { last_good_t: f64 },

    #[error("no equilibrium after {iterations} Newton iterations (residual {residual:e})")]
    NoEquilibrium { iterations: usize, residual: f64 },

    #[error("negative curvature on nominally confined degree of freedom {dof}")]
    Instability { dof: &'static str },

    #[error("sample rate {fs} Hz too low for band edge {f_max} Hz (aliasing)")]
    Aliasing { fs: f64, f_max: f64 },

    #[error("no calibration for {0}")]
    UncalibratedChannel(String),

    #[error("fit failed from every start; best weighted residual norm {best_residual:e}")]
    FitFailed { best_residual: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the CLI error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) | Error::Config { .. } => "config",
            Error::InvalidInput(_)
            | Error::IntegrationDiverged { .. }
            | Error::NoEquilibrium { .. }
            | Error::Instability { .. }
            | Error::Aliasing { .. }
            | Error::UncalibratedChannel(_) => "numeric",
            Error::Io { .. } => "io",
            Error::FitFailed { .. } => "fit",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "numeric" => 3,
            "io" => 4,
            _ => 5,
        }
    }
}
