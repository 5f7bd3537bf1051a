use thiserror::Error;

/// Errors raised by the simulation and oracle routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matching size {n} is odd")]
    OddSize { n: usize },

    #[error("size {n} exceeds the limit {max}")]
    SizeLimit { n: usize, max: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("point {x} lies outside the domain")]
    OutsideDomain { x: f64 },

    #[error("local-time grids are not aligned (bin widths {left} and {right})")]
    GridMismatch { left: f64, right: f64 },

    #[error("grid spacing {h} is too coarse for mollification scale {eps}")]
    GridTooCoarse { eps: f64, h: f64 },

    #[error("eigensolver failed on a {dim}x{dim} matrix: {reason}")]
    Eigen { dim: usize, reason: String },

    #[error("archive format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
