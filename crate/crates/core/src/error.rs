use thiserror::Error;

/// Errors raised by the numerical and data-handling layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("unlabeled dataset")]
    UnlabeledDataset,

    #[error("label `{0}` outside label space")]
    UnknownLabel(String),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("use mmd for multivariate comparisons (got d = {0})")]
    Multivariate(usize),

    #[error("invalid order {0}: need alpha > 0 and alpha != 1")]
    InvalidOrder(f64),

    #[error("empty sample")]
    EmptySample,

    #[error("degenerate table: fewer than two labels with nonzero pooled count")]
    DegenerateTable,

    #[error("insufficient permutations: need at least 100, got {0}")]
    InsufficientPermutations(usize),

    #[error("degenerate labels: training data contains a single class")]
    DegenerateLabels,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("causal research required: causality must be established before diagnosis")]
    CausalResearchRequired,

    #[error("input `{input}` not allowed at step {step}; allowed: {allowed}")]
    IllegalTransition {
        step: String,
        input: String,
        allowed: String,
    },

    #[error("target labels required")]
    TargetLabelsRequired,

    #[error("dataset unavailable: {0}")]
    DatasetUnavailable(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
