use thiserror::Error;

/// Errors raised by model construction, simulation, estimation and mitigation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },

    #[error("width {width} outside supported range 1..={max}")]
    WidthOutOfRange { width: usize, max: usize },

    #[error("value {value} does not fit in {width} bits")]
    ValueOutOfRange { value: u64, width: usize },

    #[error("cannot parse bit string {0:?}")]
    ParseBitString(String),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid probability {value} at {location}")]
    InvalidProbability { location: String, value: f64 },

    #[error("{location} sums to {sum}, expected 1")]
    NotNormalised { location: String, sum: f64 },

    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    #[error("eigenvalue {index} is {value}; response model is too close to singular to invert")]
    NearSingular { index: usize, value: f64 },

    #[error("response matrix condition estimate {estimate:e} exceeds limit")]
    IllConditioned { estimate: f64 },

    #[error("support not closed: syndrome {syndrome} maps outcome {outcome} outside the support")]
    SupportNotClosed { syndrome: String, outcome: String },

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("calibration table for input {0} is missing")]
    MissingInput(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("measurement setting does not measure the qubits required by generator {generator}")]
    SettingMismatch { generator: usize },

    #[error("malformed data: {0}")]
    Format(String),
}

impl Error {
    /// Short machine-readable name, used by the CLI error envelope.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::WidthMismatch { .. } => "WidthMismatch",
            Error::WidthOutOfRange { .. } => "WidthOutOfRange",
            Error::ValueOutOfRange { .. } => "ValueOutOfRange",
            Error::ParseBitString(_) => "ParseBitString",
            Error::NotPowerOfTwo(_) => "NotPowerOfTwo",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::InvalidProbability { .. } => "InvalidProbability",
            Error::NotNormalised { .. } => "NotNormalised",
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::NearSingular { .. } => "NearSingular",
            Error::IllConditioned { .. } => "IllConditioned",
            Error::SupportNotClosed { .. } => "SupportNotClosed",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::MissingInput(_) => "MissingInput",
            Error::InvalidPartition(_) => "InvalidPartition",
            Error::SettingMismatch { .. } => "SettingMismatch",
            Error::Format(_) => "Format",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
