use thiserror::Error;

use crate::persona::QuestionDimension;

/// Validation failure for one raw persona row.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PersonaError {
    #[error("field `{field}` value `{value}` outside {range}")]
    OutOfRange { field: String, value: String, range: String },
    #[error("field `{field}` has unknown value `{value}`")]
    UnknownEnumValue { field: String, value: String },
    #[error("required field `{0}` is missing")]
    MissingRequiredField(String),
    #[error("field `{field}` value `{value}` is not a valid number")]
    InvalidValue { field: String, value: String },
}

impl PersonaError {
    /// Rejection class name, used in reject files and ingest summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            PersonaError::OutOfRange { .. } => "OutOfRange",
            PersonaError::UnknownEnumValue { .. } => "UnknownEnumValue",
            PersonaError::MissingRequiredField(_) => "MissingRequiredField",
            PersonaError::InvalidValue { .. } => "InvalidValue",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("mapping file is not valid TOML: {0}")]
    Parse(String),
    #[error("mapping entry `{0}` is missing")]
    MissingEntry(String),
    #[error("mapping entry `{entry}` must contain placeholder `{placeholder}`")]
    MissingPlaceholder { entry: String, placeholder: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TwinError {
    #[error("persona `{persona_id}` has no gold response for {question}")]
    MissingGoldResponse { persona_id: String, question: QuestionDimension },
    #[error("response text is empty")]
    EmptyResponse,
    #[error("{target} is not a target of condition {condition}")]
    TargetNotPlanned { condition: String, target: QuestionDimension },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("input lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("cannot compare embeddings from `{0}` and `{1}`")]
    ModelMismatch(String, String),
    #[error("embedding dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("labels must contain both classes")]
    DegenerateLabels,
    #[error("input has zero variance")]
    ZeroVariance,
    #[error("input is empty")]
    Empty,
    #[error("invalid embedding: {0}")]
    InvalidVector(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FairnessError {
    #[error("{0} group is empty")]
    EmptyGroup(String),
    #[error("privileged group has a zero positive rate")]
    ZeroPrivilegedRate,
    #[error("no attribute combination of arity {0} has both cells populated")]
    NoValidCombination(usize),
    #[error("{attribute} value `{value}` is not covered by the binarization policy")]
    UnmappableValue { attribute: String, value: String },
    #[error("interaction arity must be 2 or 3, got {0}")]
    InvalidArity(usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
}
