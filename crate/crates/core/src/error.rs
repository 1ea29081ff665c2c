use alloc::string::String;

/// Errors raised by the search engine and its scoring primitives.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty sequence")]
    EmptySequence,
    #[error("invalid residue {code:?} at position {position}")]
    InvalidResidue { code: char, position: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("position {position} out of range for length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("position {position} already edited")]
    PositionAlreadyEdited { position: usize },
    #[error("identity substitution at position {position}")]
    IdentitySubstitution { position: usize },
    #[error("alphabet mismatch: provider declares {found:?}")]
    AlphabetMismatch { found: String },
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("invalid provider response: {0}")]
    InvalidResponse(String),
    #[error("expected a single substitution relative to the template, found {count}")]
    NotSingleSubstitution { count: usize },
    #[error("no eligible positions")]
    EmptyMask,
    #[error("edit budget {budget} exceeds {eligible} eligible positions")]
    EditBudgetExceedsMask { budget: usize, eligible: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scorer {name} failed on {sequence}: {reason}")]
    ScorerFailure {
        name: String,
        sequence: String,
        reason: String,
    },
    #[error("position {position} not covered by frequency table")]
    PositionNotInTable { position: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
