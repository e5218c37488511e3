use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A request the chosen model or frame cannot express.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Accumulated log-scale left the representable range.
    #[error("numerical saturation: {0}")]
    Saturation(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
