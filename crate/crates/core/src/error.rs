use alloc::string::String;

use crate::rosmm::Pair;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure classes. [`Error::class`] groups them into configuration, data and
/// numeric failures, which is what front ends map to exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite input value at position {index}")]
    NonFiniteInput { index: usize },
    #[error("classifier output {s} is saturated; ratio is unbounded")]
    Saturated { s: f64 },
    #[error("classifier output {s} maps to an infinite ratio")]
    InfiniteRatio { s: f64 },
    #[error("ratio {r} lies inside the pole band of the PARE map")]
    Pole { r: f64 },
    #[error("pole hit at sample {index}")]
    PoleAtSample { index: usize },
    #[error("degenerate point: {0}")]
    Degenerate(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("quasiprobability density has no invertible CDF; direct sampling is impossible")]
    NonInvertibleCdf,
    #[error("insufficient support for sub-ratio {pair}: {side} subset is empty")]
    InsufficientSupport { pair: Pair, side: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Shape(_) => ErrorClass::Config,
            Error::NonFiniteInput { .. }
            | Error::Degenerate(_)
            | Error::NonInvertibleCdf
            | Error::InsufficientSupport { .. } => ErrorClass::Data,
            Error::Saturated { .. }
            | Error::InfiniteRatio { .. }
            | Error::Pole { .. }
            | Error::PoleAtSample { .. }
            | Error::Numeric(_) => ErrorClass::Numeric,
        }
    }
}
