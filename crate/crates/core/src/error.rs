use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("grid too coarse: {points} points (need at least {min})")]
    GridTooCoarse { points: usize, min: usize },

    #[error("fields live on different grids")]
    FieldGridMismatch,

    #[error("wrong domain: {0}")]
    WrongDomain(String),

    #[error("wrong normalization: {0}")]
    WrongNormalization(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("converged iterate is not positive (min value {min_value:.3e}); retry with a different initial guess")]
    NegativeSolution { min_value: f64 },

    #[error("bordered linear system is singular")]
    SingularBorderedSystem,

    #[error("target gamma {0} outside (-pi/2, pi/2)")]
    TargetOutsideRange(f64),

    #[error("continuation step underflow at gamma = {gamma} after {points} accepted points")]
    StepUnderflow {
        gamma: f64,
        points: usize,
        /// The partial path up to the last accepted point.
        partial: Box<crate::continuation::ContinuationPath>,
    },

    #[error("numerical blowup at t = {time}")]
    NumericalBlowup { time: f64 },

    #[error("singular matrix at pivot {0}")]
    SingularMatrix(usize),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
