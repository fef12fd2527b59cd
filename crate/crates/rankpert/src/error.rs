use thiserror::Error;

/// Everything that can go wrong inside the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("zero matrix has no meaningful rank-p approximation")]
    ZeroMatrix,
    #[error("rank r must be at least 1")]
    EmptyRank,
    #[error("no spectral gap at p = {p} (delta = {delta})")]
    NoGap { p: usize, delta: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid density rho = {0}, expected 0 < rho <= 1")]
    InvalidDensity(f64),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("quadrature did not converge: last change {last_change:e} exceeds tol {tol:e} at {nodes_per_edge} nodes per edge")]
    QuadratureFail {
        last_change: f64,
        tol: f64,
        nodes_per_edge: usize,
    },
    #[error("pole at {pole} lies within {distance:e} of the contour (clearance {clearance:e})")]
    PoleClearance {
        pole: f64,
        distance: f64,
        clearance: f64,
    },
    #[error("lemma violation: {0}")]
    LemmaViolation(String),
    #[error("series diverging: term norms {0:?}")]
    SeriesDiverging(Vec<f64>),
    #[error("linear algebra backend failed: {0}")]
    Backend(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
