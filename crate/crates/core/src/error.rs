use thiserror::Error;

use crate::semigroup::ResidualRecord;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid index {index} out of range (grid has {len} points)")]
    Index { index: usize, len: usize },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sample range too small: maximizer on the boundary for target {target}")]
    RangeTooSmall { target: f64 },

    #[error("band overflow on axis {axis}: band {band} with {count} points")]
    BandOverflow { axis: usize, band: usize, count: usize },

    #[error("no convergence after {} iterations (last change {:.3e})", history.len(), history.last().map_or(f64::NAN, |r| r.sup_change))]
    NonConvergence { history: Vec<ResidualRecord> },

    #[error("consistency check failed: {what} ({first} vs {second}, allowed gap {allowed:.3e})")]
    Consistency {
        what: &'static str,
        first: f64,
        second: f64,
        allowed: f64,
    },

    #[error("symmetry mismatch: {0}")]
    Symmetry(String),

    #[error("value out of range: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
