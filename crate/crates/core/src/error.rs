use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unsupported norm pair {0}")]
    UnsupportedNorm(String),

    #[error("LP solver failure: {0}")]
    SolverFailure(String),

    #[error("region is infeasible")]
    InfeasibleRegion,

    #[error("empty input region: {0}")]
    EmptyRegion(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("shape mismatch in layer {layer}: {msg}")]
    Shape { layer: usize, msg: String },

    #[error("unknown activation kind '{0}'")]
    UnknownActivation(String),

    #[error("unknown fields in {context}: {fields:?}")]
    UnknownFields {
        context: String,
        fields: Vec<String>,
    },

    #[error("activation layer {0} is not fixed linear")]
    NotFixedLinear(usize),

    #[error("index {index} out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },

    #[error("oracle guardrail exceeded: {count} piece combinations (limit {limit})")]
    Guardrail { count: u128, limit: u128 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
