use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration entry could not be parsed.
    #[error("configuration error at key `{key}`: {message}")]
    Config { key: String, message: String },
    /// A configuration value lies outside its documented domain.
    #[error("validation error: {0}")]
    Validation(String),
    /// A latent row has zero power and cannot be normalized.
    #[error("degenerate signal: row {row} has zero norm")]
    DegenerateSignal { row: usize },
    /// An operation's precondition was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("data error: {0}")]
    Data(String),
    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}: {what} is not finite")]
    Divergence { epoch: usize, batch: usize, what: &'static str },
    /// Leakage assessment was requested against an eavesdropper that was never trained.
    #[error("the eavesdropper classifier has not been trained")]
    UntrainedEve,
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    /// Two artifacts that must agree on everything but one knob do not.
    #[error("mismatch: {0}")]
    Mismatch(String),
}
