use crate::ad::AdError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error("metric is not positive-definite: {0}")]
    NotPositiveDefinite(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("empty batch: {0}")]
    EmptyBatch(&'static str),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("conjugate gradient breakdown at iteration {iteration}: {detail}")]
    CgBreakdown { iteration: usize, detail: String },
    #[error("non-finite loss component `{component}` at step {step}: {source}")]
    NonFiniteLoss {
        component: &'static str,
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("geodesic left the valid region at t = {t}: {source}")]
    GeodesicFailure {
        t: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
