use thiserror::Error;

use crate::dyadic::Cube;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid cube (level {level}, index {index})")]
    InvalidCube { level: u32, index: u64 },
    #[error("resolution {0} exceeds the maximum of {max}", max = crate::dyadic::MAX_RESOLUTION)]
    ResolutionTooLarge(u32),
    #[error("expected {expected} cells for resolution {resolution}, got {found}")]
    CellCount {
        resolution: u32,
        expected: usize,
        found: usize,
    },
    #[error("cell {index} has value {value}; cells must be finite and nonnegative")]
    InvalidCell { index: usize, value: f64 },
    #[error("cell {index} is zero; a strictly positive weight is required")]
    ZeroCell { index: usize },
    #[error("resolution mismatch: expected {expected}, found {found}")]
    ResolutionMismatch { expected: u32, found: u32 },
    #[error("cube {cube} is finer than resolution {resolution}")]
    CubeTooFine { cube: Cube, resolution: u32 },
    #[error("expected {expected} functions, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("exponents outside the theorem's hypotheses: {0}")]
    Inapplicable(String),
    #[error("weight vanishes identically")]
    ZeroWeight,
    #[error("norm of the input vanishes")]
    ZeroNorm,
    #[error("non-finite constant: {0}")]
    NonFinite(String),
    #[error("family is not sparse: cube {cube} has covered fraction {fraction}")]
    NotSparse { cube: Cube, fraction: f64 },
    #[error("empty cube family")]
    EmptyFamily,
    #[error("cube {0} is not contained in any forest root")]
    OutsideForest(Cube),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
