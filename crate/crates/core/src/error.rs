use thiserror::Error;

/// Errors raised by the library. Premise and conclusion failures of the
/// checkers are *not* errors; they are recorded in a [`crate::report::Report`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid projection matrix: {0}")]
    InvalidProjection(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("missing field {field} on atom {atom}")]
    MissingField { field: &'static str, atom: usize },

    #[error("singular quadrature at center (atom {0} coincides with the center)")]
    SingularAtCenter(usize),

    #[error("empty varifold: {0}")]
    EmptyVarifold(String),

    #[error("separation violated: {0}")]
    SeparationViolated(String),

    #[error("value sets too close: distance {distance} < 2*delta = {required}")]
    ValueSetsTooClose { distance: f64, required: f64 },

    #[error("partition lemma violated: {0}")]
    PartitionLemmaViolated(String),

    #[error("premise violated at ladder level {level}: {detail}")]
    LevelPremise { level: usize, detail: String },

    #[error("nesting violated: {0}")]
    NestingViolated(String),

    #[error("constant self-check failed: {0}")]
    SelfCheck(String),

    #[error("root not bracketed: {0}")]
    RootNotBracketed(String),

    #[error("missing prerequisite constant `{0}`")]
    MissingPrerequisite(&'static str),

    #[error("non-integer multiplicity: {0}")]
    NonIntegerMultiplicity(String),

    #[error("empty graph domain: {0}")]
    EmptyGraph(String),

    #[error("not a null-curvature varifold: {0}")]
    NotNullCurvature(String),

    #[error("invalid function descriptor: {0}")]
    InvalidFunction(String),

    #[error("overlapping arches: {0}")]
    OverlappingArches(String),

    #[error("rendering limited to planar scenes (n = {0})")]
    NotPlanar(usize),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}
