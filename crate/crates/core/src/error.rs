use thiserror::Error;

/// Errors raised by the tangential calculus, dynamics and verification layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("degree {degree} exceeds leaf dimension {leaf_dim}")]
    DegreeOverflow { degree: usize, leaf_dim: usize },

    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },

    #[error("invalid multi-index or mode: {0}")]
    InvalidTerm(String),

    #[error("tangential directions are linearly dependent")]
    DependentDirections,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("map is not foliated (tangential residual {residual:e})")]
    NotFoliated { residual: f64 },

    #[error("vector field is not foliated (leafwise variation of transverse part {residual:e})")]
    FieldNotFoliated { residual: f64 },

    #[error("submanifolds do not intersect foliatedly transversally: {0}")]
    NotTransversal(String),

    #[error("pullback leaves the truncation box: mode {mode:?} exceeds |m| <= {max_mode}")]
    TruncationExceeded { mode: Vec<i64>, max_mode: i64 },

    #[error("reduced cohomology is truncation limited in degree {degree}")]
    TruncationLimited { degree: usize },

    #[error("duality pairing is singular in degree {degree} (det = {det:e})")]
    DualityFailure { degree: usize, det: f64 },

    #[error("non-hyperbolic data: {0}")]
    NonHyperbolic(String),

    #[error("degenerate coincidence set: {0}")]
    Degenerate(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("flow direction has no transverse component; the reduced quotient is undefined")]
    QuotientUndefined,

    #[error("regularization: {0}")]
    Regularization(String),

    #[error("distribution pairing: {0}")]
    Support(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// A hypothesis of a formula fails for the given data, as opposed to a
    /// malformed input or a numerical breakdown.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_)
                | Error::NotTransversal(_)
                | Error::TruncationLimited { .. }
                | Error::Unsupported(_)
                | Error::QuotientUndefined
                | Error::NonHyperbolic(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
