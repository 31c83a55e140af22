use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, VemError>;

#[derive(Debug, Error)]
pub enum VemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("cell {cell} is oriented clockwise (signed area {area:e})")]
    Orientation { cell: usize, area: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("degenerate cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },

    #[error("mass matrix is not positive definite")]
    MassNotPositiveDefinite,

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst_residual:e})")]
    NoConvergence {
        iterations: usize,
        worst_residual: f64,
        best_residuals: Vec<f64>,
    },

    #[error("level N={n}: {source}")]
    Level {
        n: usize,
        #[source]
        source: Box<VemError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl VemError {
    pub(crate) fn at_level(self, n: usize) -> Self {
        VemError::Level {
            n,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping level context.
    pub fn root(&self) -> &VemError {
        match self {
            VemError::Level { source, .. } => source.root(),
            other => other,
        }
    }
}
