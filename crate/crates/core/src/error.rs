use std::path::PathBuf;

use thiserror::Error;

use crate::dynamics::Trajectory;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no labels")]
    NoLabels,

    #[error("isolated node {0}")]
    IsolatedNode(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("train node {0} lacks a label")]
    UnlabeledTrainNode(usize),

    #[error("empty train mask")]
    EmptyTrainMask,

    #[error("class absent: {0}")]
    ClassAbsent(usize),

    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("divergence at t = {t}")]
    Divergence { t: f64, partial: Box<Trajectory> },

    #[error("non-finite activations in layer {0}")]
    NonFinite(usize),

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("graph still disconnected after {0} attempts")]
    Disconnected(usize),

    #[error("{}:{line}: {msg}", file.display())]
    Parse {
        file: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::NonFinite(_) | Error::NoConvergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
