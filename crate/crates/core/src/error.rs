use thiserror::Error;

/// Everything that can go wrong while building or analysing a state.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("n = {n} lies outside the valid range of f (max_valid_n = {max})")]
    OutOfValidRange { n: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown nonlinearity function `{0}`")]
    UnknownNonlinearity(String),

    #[error("spectrum value e_{index} = {value} is not positive")]
    NonPositiveSpectrum { index: usize, value: f64 },

    #[error("coefficient C_{index} is zero")]
    ZeroCoefficient { index: usize },

    #[error("line {line}: {message}")]
    SpectrumParse { line: usize, message: String },

    #[error("variance {0:e} is negative beyond rounding; truncation is insufficient")]
    NegativeVariance(f64),

    #[error("lambda = -1 with z != 0 has no normalizable solution")]
    CaseTwoNoSolution,

    #[error("truncation did not converge: tail mass {tail:e} at dimension {dim}")]
    TruncationNotConverged { dim: usize, tail: f64 },

    #[error("|z| = {z_abs} is outside the convergence disc of radius {radius}")]
    OutsideConvergenceDisc { z_abs: f64, radius: f64 },

    #[error("amplitude series diverges (asymptotic ratio {ratio})")]
    DivergentSeries { ratio: f64 },

    #[error("S(n, h) requires h <= n/2, got n = {n}, h = {h}")]
    IndexOutOfRange { n: usize, h: usize },

    #[error("|1 + lambda| = {0:e} is too small to evaluate")]
    NumericallySingular(f64),

    #[error("closed-form cancellation leaves a rounding error of {bound:e} relative to the peak amplitude")]
    PrecisionLoss { bound: f64 },

    #[error("Mandel Q is undefined for the vacuum")]
    VacuumUndefined,

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("requested construction path does not apply: {0}")]
    CaseMismatch(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable identifier used in CLI diagnostics and the scan status column.
    pub fn name(&self) -> &'static str {
        match self {
            Error::OutOfValidRange { .. } => "OutOfValidRange",
            Error::InvalidParam(_) => "InvalidParam",
            Error::UnknownNonlinearity(_) => "UnknownNonlinearity",
            Error::NonPositiveSpectrum { .. } => "NonPositiveSpectrum",
            Error::ZeroCoefficient { .. } => "ZeroCoefficient",
            Error::SpectrumParse { .. } => "SpectrumParse",
            Error::NegativeVariance(_) => "NegativeVariance",
            Error::CaseTwoNoSolution => "CaseTwoNoSolution",
            Error::TruncationNotConverged { .. } => "TruncationNotConverged",
            Error::OutsideConvergenceDisc { .. } => "OutsideConvergenceDisc",
            Error::DivergentSeries { .. } => "DivergentSeries",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::NumericallySingular(_) => "NumericallySingular",
            Error::PrecisionLoss { .. } => "PrecisionLoss",
            Error::VacuumUndefined => "VacuumUndefined",
            Error::NotNormalized(_) => "NotNormalized",
            Error::CaseMismatch(_) => "CaseMismatch",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
