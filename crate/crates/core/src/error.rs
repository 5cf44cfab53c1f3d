use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("missing parameter `{0}`")]
    MissingParam(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A solution left the representable range (|x| > 1e12 or non-finite).
    #[error("numerical overflow at t = {t}")]
    Overflow { t: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solution map is singular at t = {t} (all solutions pass through 0)")]
    SingularTime { t: f64 },

    #[error("explicit formula not implemented for t = {t}")]
    NotImplementedWindow { t: f64 },

    #[error("mesh node {index} overflowed: {source}")]
    MeshOverflow { index: usize, source: Box<Error> },

    #[error("{dropped} of {total} ensemble members overflowed (more than 1%)")]
    TooManyDropped { dropped: usize, total: usize },

    #[error("trajectory settled onto an equilibrium (last delay interval constant)")]
    EquilibriumTrap,

    #[error("partition bin {0} has no outgoing transitions")]
    EmptyBin(usize),

    #[error("sample {index} = {value} lies outside the partition")]
    OutOfPartition { index: usize, value: f64 },

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("model `{0}` has no registered feedback pre-image enumeration")]
    UnsupportedModel(String),

    #[error("bisection midpoint could not be classified")]
    LostClassification,

    #[error("bisection midpoint could not be assigned to a basin")]
    BasinAmbiguity,

    #[error("no proper interior maximum found at map step {step}")]
    NoInteriorMaximum { step: usize },

    #[error("no successful stagger found at map step {step}")]
    StaggerExhausted { step: usize },

    #[error("tangent vector {index} collapsed at map step {step}")]
    DegenerateTangent { index: usize, step: usize },

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("correlation sum vanishes at r = {r}")]
    InsufficientPairs { r: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors that come from numerical blowup rather than bad input.
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::MissingParam(_)
                | Error::InvalidParam { .. }
                | Error::InvalidInput(_)
                | Error::UnsupportedModel(_)
        )
    }
}
