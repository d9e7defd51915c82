use thiserror::Error;

/// Errors raised by the numerical engine and the experiment pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integral did not reach tolerance: estimated error {achieved:.3e} > {requested:.3e} after {evaluations} evaluations")]
    ToleranceNotMet {
        achieved: f64,
        requested: f64,
        evaluations: usize,
    },

    #[error("radial integral for the marginal is not integrable at u = {at}: {reason}")]
    NonIntegrable { at: f64, reason: String },

    #[error("pole at {pole} lies within {distance:.3e} of the support boundary")]
    PoleOnBoundary { pole: f64, distance: f64 },

    #[error("oscillation unresolved: {panels} panels exceed the cap of {cap}")]
    UnresolvedOscillation { panels: usize, cap: usize },

    #[error("integral diverges at the endpoint (local exponent {exponent:.4})")]
    DivergentIntegral { exponent: f64 },

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("contour too coarse: phase jump {jump:.3} rad at node {node}")]
    ContourTooCoarse { jump: f64, node: usize },

    #[error("dispersion relation vanishes on the contour (|D| = {modulus:.3e})")]
    ZeroOnContour { modulus: f64 },

    #[error("stability scan inconclusive: margin {margin:.3e} exceeds sampled minimum {minimum:.3e}")]
    Inconclusive { minimum: f64, margin: f64 },

    #[error("|D| = {modulus:.3e} is below half the certified floor {theta0:.3e}")]
    NearZeroDivisor { modulus: f64, theta0: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step too large: {0}")]
    StepTooLarge(String),

    #[error("trajectory is not radial in k")]
    NonRadialInput,

    #[error("decay fit needs at least {needed} samples in the window, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("decay fit received non-positive value {value} at t = {t}")]
    NonPositiveValue { t: f64, value: f64 },

    #[error("shifted arguments left the momentum box: {dropped} of {evaluated} evaluations dropped")]
    GridShiftOutOfBox { dropped: usize, evaluated: usize },

    #[error("Picard iteration failed to contract: distances {distances:?}")]
    NoContraction { distances: Vec<f64> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
