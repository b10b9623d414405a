use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("derivative order {0} is not supported (expected 1 or 2)")]
    DerivativeOrder(u8),

    #[error("kernel spacing {kernel} does not match grid spacing {grid}")]
    SpacingMismatch { grid: f64, kernel: f64 },

    #[error("grid too narrow: boundary modulus is {ratio:.3e} of the peak (limit {limit:.1e})")]
    TailTooHeavy { ratio: f64, limit: f64 },

    #[error("density is not normalized: integral = {integral}")]
    NotNormalized { integral: f64 },

    #[error("density is negative somewhere (min {min:.3e})")]
    NegativeDensity { min: f64 },

    #[error("kernel validation failed: {0}")]
    KernelInvalid(String),

    #[error("derivative order {order} in observable '{label}': substitution path unavailable; use the wave-function path")]
    SubstitutionUnavailable { label: String, order: u8 },

    #[error("parameter sets cover different observables: {0}")]
    LabelMismatch(String),

    #[error("paired statistics need equal sample sizes (got {0:?})")]
    UnequalSampleSizes(Vec<usize>),

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("momentum-spread domain violated: alpha^2 + 2 sigma^2 = {lhs} must exceed lambda^2 = {rhs}")]
    DomainViolation { lhs: f64, rhs: f64 },

    #[error("spectral density has {mass:.3e} of its mass in the outer 5% of the frequency range (aliasing)")]
    Aliasing { mass: f64 },

    #[error("'{label}' mean disagrees between substitution ({substitution}) and wave-function ({wavefunction}) paths")]
    PathMismatch {
        label: String,
        substitution: f64,
        wavefunction: f64,
    },

    #[error("positional entropy decreased by {0:.3e}")]
    EntropyLoss(f64),

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable snake_case tag for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidInput(_) => "invalid_input",
            Error::GridMismatch => "grid_mismatch",
            Error::DerivativeOrder(_) => "derivative_order",
            Error::SpacingMismatch { .. } => "spacing_mismatch",
            Error::TailTooHeavy { .. } => "tail_too_heavy",
            Error::NotNormalized { .. } => "not_normalized",
            Error::NegativeDensity { .. } => "negative_density",
            Error::KernelInvalid(_) => "kernel_invalid",
            Error::SubstitutionUnavailable { .. } => "substitution_unavailable",
            Error::LabelMismatch(_) => "label_mismatch",
            Error::UnequalSampleSizes(_) => "unequal_sample_sizes",
            Error::TooFewSamples(_) => "too_few_samples",
            Error::DomainViolation { .. } => "domain_violation",
            Error::Aliasing { .. } => "aliasing",
            Error::PathMismatch { .. } => "path_mismatch",
            Error::EntropyLoss(_) => "entropy_loss",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
