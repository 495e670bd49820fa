//! Error type shared by all engine modules.

use thiserror::Error;

/// Errors raised by construction, validation, and analysis operations.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A finite set was given the same label twice.
    #[error("duplicate label `{label}` in finite set")]
    DuplicateLabel { label: String },

    /// Two games were combined along boundaries that do not match label-for-label.
    #[error("boundary mismatch in {context}: expected {expected}, found {found}")]
    BoundaryMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    /// Conditioning over the empty index set.
    #[error("conditioning requires a nonempty index set")]
    EmptyIndexSet,

    /// An exhaustive enumeration would exceed the configured guard.
    #[error("enumeration of {size} cases exceeds the guard of {guard}")]
    EnumerationTooLarge { size: u128, guard: usize },

    /// A pair of maps is not a morphism between the given games.
    #[error("invalid game morphism: {reason}")]
    InvalidMorphism { reason: String },

    /// An iterated game needs at least one move per round.
    #[error("the move set of the stage game is empty")]
    EmptyMoveSet,

    /// An iterated game needs at least one stage strategy per round.
    #[error("the strategy set of the stage game is empty")]
    EmptyStrategySet,

    /// Mean-payoff evaluation on the empty prefix.
    #[error("mean-payoff utility cannot be evaluated on an empty prefix")]
    EmptyPrefix,

    /// Shifting a finite-horizon utility past its horizon.
    #[error("finite-horizon utility already exhausted; cannot shift further")]
    HorizonExhausted,

    /// Exact membership checking requires a positive-affine-invariant
    /// stage equilibrium.
    #[error("stage equilibrium is not flagged positive-affine-invariant; use the bounded check")]
    NotAffineInvariant,

    /// Exact membership checking requires a discounted utility functional.
    #[error("exact membership checking requires a discounted utility functional")]
    ExactRequiresDiscounted,

    /// A move or stage strategy is not part of the stage game.
    #[error("unknown move or stage strategy `{label}`")]
    UnknownMove { label: String },

    /// A finite function is missing an entry it must be total on.
    #[error("{function} is not total: missing entry for `{key}`")]
    MissingEntry { function: &'static str, key: String },

    /// A numeric or structural parameter is out of range.
    #[error("invalid {what}: {message}")]
    InvalidParameter { what: &'static str, message: String },

    /// Input text could not be parsed.
    #[error("parse error: {message}")]
    Parse { message: String },

    /// Input parsed but does not satisfy the schema of the expected object.
    #[error("schema error: {message}")]
    Schema { message: String },
}

impl Error {
    /// Stable machine-readable category, one distinct string per variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DuplicateLabel { .. } => "duplicate_label",
            Error::BoundaryMismatch { .. } => "boundary_mismatch",
            Error::EmptyIndexSet => "empty_index_set",
            Error::EnumerationTooLarge { .. } => "enumeration_too_large",
            Error::InvalidMorphism { .. } => "invalid_morphism",
            Error::EmptyMoveSet => "empty_move_set",
            Error::EmptyStrategySet => "empty_strategy_set",
            Error::EmptyPrefix => "empty_prefix",
            Error::HorizonExhausted => "horizon_exhausted",
            Error::NotAffineInvariant => "not_affine_invariant",
            Error::ExactRequiresDiscounted => "exact_requires_discounted",
            Error::UnknownMove { .. } => "unknown_move",
            Error::MissingEntry { .. } => "missing_entry",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Parse { .. } => "parse_error",
            Error::Schema { .. } => "schema_error",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_are_distinct() {
        let kinds = [
            Error::DuplicateLabel { label: "a".into() }.kind(),
            Error::BoundaryMismatch {
                context: "compose",
                expected: "x".into(),
                found: "y".into(),
            }
            .kind(),
            Error::EmptyIndexSet.kind(),
            Error::EnumerationTooLarge { size: 2, guard: 1 }.kind(),
            Error::InvalidMorphism { reason: "r".into() }.kind(),
            Error::EmptyMoveSet.kind(),
            Error::EmptyStrategySet.kind(),
            Error::EmptyPrefix.kind(),
            Error::HorizonExhausted.kind(),
            Error::NotAffineInvariant.kind(),
            Error::ExactRequiresDiscounted.kind(),
            Error::UnknownMove { label: "m".into() }.kind(),
            Error::MissingEntry {
                function: "play",
                key: "k".into(),
            }
            .kind(),
            Error::InvalidParameter {
                what: "delta",
                message: "m".into(),
            }
            .kind(),
            Error::Parse { message: "m".into() }.kind(),
            Error::Schema { message: "m".into() }.kind(),
        ];
        let unique: std::collections::BTreeSet<_> = kinds.iter().collect();
        assert_eq!(unique.len(), kinds.len());
    }
}
