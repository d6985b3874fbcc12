use std::path::PathBuf;

use thiserror::Error;

use crate::divergence::DivergenceError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("model topology: {0}")]
    Topology(String),
    #[error("non-finite {what} at epoch {epoch}, step {step}")]
    NonFiniteTraining {
        what: &'static str,
        epoch: usize,
        step: usize,
    },
    #[error("non-finite objective at step {step}")]
    NonFiniteObjective { step: usize },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("cell {cell} failed: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
