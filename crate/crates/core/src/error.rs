use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{msg} at line {line}")]
    Parse { line: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("window longer than recording")]
    WindowTooLong,

    #[error("nonstationary parameters (spectral radius {0:.6} >= 1)")]
    Nonstationary(f64),

    #[error("stationarity resampling cap of {0} draws exceeded")]
    ResampleCap(usize),

    #[error("estimated R not invertible")]
    SingularR,

    #[error("NPHC fit diverged at iteration {iteration}; last finite iterate {iterate}")]
    Divergence { iteration: usize, iterate: String },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("fewer windows than min_segment ({windows} < {min_segment})")]
    TooFewWindows { windows: usize, min_segment: usize },

    #[error("window {index}: {source}")]
    Window {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn in_window(self, index: usize) -> Self {
        Error::Window {
            index,
            source: Box::new(self),
        }
    }
}
