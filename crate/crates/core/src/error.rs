use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatchetError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("shape classification failed: {0}")]
    Classification(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid graphical elements: {0}")]
    InvalidElements(String),
    #[error("ODE integration blew up at t = {time}: total mass {mass}")]
    BlowUp { time: f64, mass: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, RatchetError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(RatchetError::Domain(msg.into()))
}
