use thiserror::Error;

/// Errors raised by the numeric kernels, the census and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {x} outside [-1, 1]")]
    Domain { x: f64 },

    #[error("degree {n} exceeds the supported maximum {max}")]
    DegreeOverflow { n: usize, max: usize },

    #[error("root finding did not converge for degree {n}, root {index}")]
    Convergence { n: usize, index: usize },

    #[error("grid has {cols} columns per row; at least 8 are required")]
    DegenerateGrid { cols: usize },

    #[error("grid of {cells} cells exceeds the configured budget of {budget}")]
    CellBudget { cells: usize, budget: usize },

    #[error("gradient grids are required for this operation")]
    MissingGradient,

    #[error("degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed lattice: {0}")]
    MalformedLattice(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the environment rather than by invalid input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_)) || matches!(self, Error::Csv(e) if e.is_io_error())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
