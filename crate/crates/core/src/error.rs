use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("singularity in right-hand side at state {0:?}")]
    Singularity(Vec<f64>),
    #[error("integration blow-up at t = {time}")]
    IntegrationBlowup { time: f64 },
    #[error("degenerate smoother: {0}")]
    DegenerateSmoother(String),
    #[error("empty localization window at t0 = {t0}")]
    EmptyWindow { t0: f64 },
    #[error("numerical rank deficiency: {0}")]
    NumericalRank(String),
    #[error("no information: {0}")]
    NoInformation(String),
    #[error("alternation did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::Singularity(_) => "singularity",
            Error::IntegrationBlowup { .. } => "integration_blowup",
            Error::DegenerateSmoother(_) => "degenerate_smoother",
            Error::EmptyWindow { .. } => "empty_window",
            Error::NumericalRank(_) => "numerical_rank",
            Error::NoInformation(_) => "no_information",
            Error::NonConvergence { .. } => "non_convergence",
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
        if e.is_io_error() {
            Error::Io(e.to_string())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
