use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("scale-window error: {0}")]
    ScaleWindow(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("aliasing error: {0}")]
    Aliasing(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("degenerate level: {0}")]
    DegenerateLevel(String),
    #[error("cube too small: {0}")]
    CubeSize(String),
    #[error("finite-difference stability: {0}")]
    Stability(String),
    #[error("refused: {0}")]
    Refusal(String),
    #[error("zero estimate: {0}")]
    ZeroEstimate(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("tolerance failure: {0}")]
    Tolerance(String),
    #[error("config error at key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
