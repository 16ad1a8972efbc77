use std::path::{Path, PathBuf};

use thiserror::Error;
use xaits_core::evalstats::EvalError;
use xaits_core::explanation::ExplanationError;
use xaits_core::lime::LimeError;
use xaits_core::model_selection::SelectionError;
use xaits_core::shap::ShapError;
use xaits_core::svr::{ModelFormatError, SvrError};
use xaits_core::synth::SynthError;
use xaits_core::timeseries::TimeSeriesError;

/// Process exit code for bad input of any kind.
pub const EXIT_VALIDATION: i32 = 2;
/// Process exit code for solver or fitting failures.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// An error tied to an input file.
    #[error("{}: {inner}", path.display())]
    InFile { path: PathBuf, inner: Box<CliError> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::InFile { inner, .. } => inner.exit_code(),
            CliError::Validation(_) | CliError::Io { .. } => EXIT_VALIDATION,
        }
    }

    pub fn in_file(self, path: &Path) -> Self {
        CliError::InFile {
            path: path.to_owned(),
            inner: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn svr_is_numeric(e: &SvrError) -> bool {
    matches!(e, SvrError::NoConvergence { .. })
}

impl From<SvrError> for CliError {
    fn from(e: SvrError) -> Self {
        if svr_is_numeric(&e) {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        match &e {
            SelectionError::Svr(inner) if svr_is_numeric(inner) => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<LimeError> for CliError {
    fn from(e: LimeError) -> Self {
        match e {
            LimeError::SingularFit { .. } | LimeError::NonFinitePrediction => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}

validation_from!(
    TimeSeriesError,
    ShapError,
    EvalError,
    SynthError,
    ExplanationError,
    ModelFormatError,
    serde_json::Error
);
