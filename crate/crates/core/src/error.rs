use std::path::PathBuf;

use thiserror::Error;

use crate::coupling::CouplingError;
use crate::io::PanelCsvError;
use crate::market::ModelError;
use crate::panel::PanelError;
use crate::series::SeriesError;
use crate::spectra::SpectraError;
use crate::xcorr::XcorrError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    PanelCsv(#[from] PanelCsvError),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Xcorr(#[from] XcorrError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
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

    /// Process exit code: 2 for configuration problems, 3 for everything
    /// that went wrong at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}
