use thiserror::Error;

use crate::matrix::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("assumption {assumption} violated at t = {t}: {detail}")]
    AssumptionViolated { t: i64, assumption: &'static str, detail: String },

    #[error("unknown builtin system '{0}'")]
    UnknownBuiltin(String),

    #[error("malformed parameters: {0}")]
    MalformedParams(String),

    #[error("index t = {t} outside [{start}, {end}]")]
    OutOfRange { t: i64, start: i64, end: i64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{quantity} did not settle within horizon {horizon} (last increment {increment:.3e}); the endpoint is probably not limit-circle")]
    TailDivergence { quantity: &'static str, horizon: i64, increment: f64 },

    #[error("no definiteness window found up to t = {max_window}")]
    DefinitenessNotFound { max_window: i64 },

    #[error("classification ambiguous: {0}")]
    ClassificationAmbiguous(String),

    #[error("deficiency indices differ (d+ = {d_plus}, d- = {d_minus}); no self-adjoint extension exists")]
    NoSelfAdjointExtension { d_plus: usize, d_minus: usize },

    #[error("invalid boundary condition: {0}")]
    InvalidBoundaryCondition(String),

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("z = {re}{im:+}i is (numerically) an eigenvalue: {detail}")]
    ZIsEigenvalue { re: f64, im: f64, detail: String },

    #[error("no admissible shift found after {tries} attempts")]
    ShiftSearchFailed { tries: usize },

    #[error("0 is an eigenvalue of the extension and no spectral shift is configured")]
    ZeroInSpectrum,

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::MalformedParams(_) | Error::UnknownBuiltin(_) => 1,
            Error::ZIsEigenvalue { .. } | Error::ShiftSearchFailed { .. } | Error::ZeroInSpectrum => 3,
            Error::ClassificationAmbiguous(_) | Error::NoSelfAdjointExtension { .. } => 4,
            _ => 2,
        }
    }

    pub(crate) fn z_eigen(z: num_complex::Complex64, detail: impl Into<String>) -> Error {
        Error::ZIsEigenvalue { re: z.re, im: z.im, detail: detail.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::MalformedParams(e.to_string())
    }
}
