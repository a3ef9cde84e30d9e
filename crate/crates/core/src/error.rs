use thiserror::Error;

/// Errors raised by the aggregation engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid range: lo = {lo} must be below hi = {hi}")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The discretization grid does not cover the truncation window [-L, L].
    #[error("grid [{grid_lo}, {grid_hi}] does not span the window [-{l}, {l}]")]
    WindowCoverage { grid_lo: f64, grid_hi: f64, l: f64 },

    #[error("product grid has {cells} cells, above the cap of {cap}")]
    SizeGuard { cells: u128, cap: u128 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("copula density bounds (c_max, c'_max) have not been set")]
    UnsetBounds,

    #[error("bracket failure: tail probability {tail} at the lower end is already <= {target}")]
    BracketFailure { tail: f64, target: f64 },

    #[error("degenerate tail: no mass at or above the threshold {0}")]
    DegenerateTail(f64),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
