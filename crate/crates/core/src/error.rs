use std::io;

/// Errors raised by the numerical routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A state or atom index does not exist.
    #[error("index {index} out of range for {len} states")]
    Index { index: usize, len: usize },

    /// A stable density table could not be built.
    #[error("profile construction failed: {0}")]
    Construction(String),

    /// An evaluation point is too close to the edge of a grid.
    #[error("point {x} lies outside the interior {lo}..{hi} of the grid")]
    Boundary { x: f64, lo: f64, hi: f64 },

    /// Malformed serialized input.
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
