use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or incomplete configuration. `path` names the offending key.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("trajectory diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("non-finite reservoir state at step {step}")]
    NonFiniteState { step: usize },

    #[error("singular normal matrix in ridge regression (use a positive ridge parameter)")]
    SingularMatrix,

    #[error("power iteration failed to converge after {retries} retries")]
    PowerIteration { retries: usize },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("tracker bundle error: {0}")]
    Bundle(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user input rather than numerics or I/O.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Calibration(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
