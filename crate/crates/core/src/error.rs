use thiserror::Error;

pub type Result<T> = std::result::Result<T, GptError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GptError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("effect is not proper for model `{model}`")]
    ImproperEffect { model: String },

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("joint state is not in the maximal tensor product")]
    NotInMaxTensorProduct,

    #[error("joint state is not an inner product state: {0}")]
    NotInnerProductState(String),

    #[error("models are not similar: `{0}` vs `{1}`")]
    DissimilarModels(String, String),

    #[error("local map rejected: {0}")]
    InvalidLocalMap(String),

    #[error("unsupported scenario: {0}")]
    Scenario(String),

    #[error("certificate check failed: {0}")]
    Certificate(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("{0}")]
    Io(String),
}
