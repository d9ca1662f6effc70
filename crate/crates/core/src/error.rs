use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = SpectralError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("{what} is not Hermitian: asymmetry {asymmetry:e} exceeds {allowed:e}")]
    NonHermitian {
        what: String,
        asymmetry: f64,
        allowed: f64,
    },

    #[error("rigging has numerical rank {rank} < {rows} (smallest singular value {sigma_min:e}, rank_tol {rank_tol:e})")]
    RankDeficientRigging {
        rank: usize,
        rows: usize,
        sigma_min: f64,
        rank_tol: f64,
    },

    #[error("distance from lambda0 to spec(g) is {distance:e}, required gap is {gap:e}")]
    GapViolation { distance: f64, gap: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{op} is not supported for {kind} models")]
    UnsupportedModel {
        op: &'static str,
        kind: &'static str,
    },

    #[error("evaluation on the real axis (z = {0}) is not defined")]
    RealAxisEvaluation(Complex64),

    #[error("near-singular solve at z = {z}: condition estimate {condition:e}")]
    NearSingularSolve { z: Complex64, condition: f64 },

    #[error("resonant coupling at z = {z}: smallest singular value of 1 + T0 J is {sigma_min:e}")]
    ResonantCoupling { z: Complex64, sigma_min: f64 },

    #[error("imaginary part of T is indefinite beyond round-off (eigenvalue {eigenvalue:e})")]
    IndefiniteImaginaryPart { eigenvalue: f64 },

    #[error("schedule too short: {count} offsets, at least {required} required")]
    ScheduleTooShort { count: usize, required: usize },

    #[error("lambda = {lambda} is not the block eigenvalue {lambda0}")]
    NotAtEigenvalue { lambda: f64, lambda0: f64 },

    #[error("boundary limit did not converge for {0}")]
    NotConverged(String),

    #[error("vector is not spectrally localized: |(H0 - lambda) f| = {defect:e} > {allowed:e}")]
    NotLocalized { defect: f64, allowed: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at {location}: {message}")]
    ConfigParse { location: String, message: String },

    #[error("failed to load model from {path}: {message}")]
    ModelLoad { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SpectralError {
    fn from(e: std::io::Error) -> Self {
        SpectralError::Io(e.to_string())
    }
}

impl From<csv::Error> for SpectralError {
    fn from(e: csv::Error) -> Self {
        SpectralError::Io(e.to_string())
    }
}
