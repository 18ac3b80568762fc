use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed text input. `line` is 1-based.
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Sizes or lengths that do not line up (point/label counts, mask length,
    /// histogram shape).
    #[error("structural error: {0}")]
    Structural(String),

    /// Values that break a documented invariant (row sums, label ranges).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// NaN or infinite input where finite values are required.
    #[error("non-finite numeric input: {0}")]
    NumericInput(String),
}
