use thiserror::Error;

/// Errors raised when building or evaluating a market model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field} must be {requirement}, got {value}")]
    InvalidParameter {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("level {level} is outside 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("distribution needs at least one level")]
    NoLevels,
    #[error("distribution parameters cannot be normalized: {0}")]
    NotNormalizable(String),
    #[error("price list has {got} entries but the market has {expected} segments")]
    PriceLength { expected: usize, got: usize },
    #[error("degenerate system: {0}")]
    Degenerate(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

pub(crate) fn require(
    ok: bool,
    field: &'static str,
    requirement: &'static str,
    value: f64,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            field,
            requirement,
            value,
        })
    }
}
