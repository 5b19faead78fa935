use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported operation: {op} is not defined for generator {generator}")]
    Unsupported { op: &'static str, generator: String },
    #[error("value {value} saturates the derivative range of {generator} (boundary {boundary})")]
    Saturation {
        generator: String,
        value: f64,
        boundary: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numeric failure in {context}: {detail}")]
    Numeric { context: String, detail: String },
    #[error("black box failed at {at}: {detail}")]
    BlackBox { at: String, detail: String },
}

impl Error {
    pub fn numeric(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numeric {
            context: context.into(),
            detail: detail.into(),
        }
    }

    /// Configuration-class errors, as opposed to numerical breakdowns.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Unsupported { .. } | Error::Shape(_) | Error::Invalid(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
