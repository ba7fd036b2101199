use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input failed a construction-time check. `field` is a dotted path
    /// (e.g. `design.table`) when the value came from a plan file.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("price {price:?} outside the feasible box (seller {seller})")]
    Domain { seller: usize, price: Vec<f64> },

    #[error("non-positive CV slope beta_{seller} = {beta:.6e} at p = {price:?}")]
    NonPositiveSlope { seller: usize, beta: f64, price: Vec<f64> },

    #[error("conditional P(. | Y_{seller} = {arm}) undefined: marginal has zero mass")]
    UndefinedConditional { seller: usize, arm: u8 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (last step {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("update map not certified as a contraction (sup ||Dz|| = {norm_sup:.6})")]
    NotContraction { norm_sup: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Prefixes the field path of a validation error, leaving other errors alone.
    pub(crate) fn under(self, prefix: &str) -> Self {
        match self {
            Error::Validation { field, message } => Error::Validation {
                field: if field.is_empty() {
                    prefix.to_string()
                } else {
                    format!("{prefix}.{field}")
                },
                message,
            },
            other => other,
        }
    }
}
