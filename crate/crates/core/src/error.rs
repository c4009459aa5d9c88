use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("matrix is not positive definite (det = {0:e})")]
    NotPositiveDefinite(f64),
    #[error("time {t} outside the path window [{t0}, {t1}]")]
    OutsideWindow { t: f64, t0: f64, t1: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
