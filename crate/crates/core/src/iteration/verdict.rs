//! Verdicts of equilibrium membership checks.

use std::fmt;

use crate::scalar::Scalar;
use crate::stream::StreamPrefix;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    /// Membership established (exactly for the exact procedure, in the
    /// depth-`d` approximant for the bounded one).
    Holds,
    /// Definitive non-membership with a witness.
    Fails,
    /// The check ran but the utility surrogate cannot bound its tail, so
    /// neither answer is definitive.
    Unknown,
}

/// Where a check failed: the history at which the stage optimality test was
/// violated, and, when the stage equilibrium there is nonempty, a stage
/// strategy that would have been optimal instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness<T: Scalar> {
    pub history: StreamPrefix<T>,
    pub deviation: Option<Value<T>>,
}

/// How much of the history tree the verdict covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthChecked {
    /// Histories shorter than the given depth.
    Bounded(usize),
    /// Every machine state, i.e. every history; the exact procedure.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning<T: Scalar> {
    /// The utility surrogate's tail bound exceeded the tolerance at the
    /// evaluation horizon; comparisons were made on approximate values.
    ApproximateUtility { tail_bound: T },
    /// An equilibrium comparison landed within the tolerance of the decision
    /// boundary; ties were treated as "not a strict improvement".
    NumericallyMarginal { margin: T },
}

/// Outcome of a membership check, with enough context to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<T: Scalar> {
    pub status: VerdictStatus,
    pub witness: Option<Witness<T>>,
    pub depth_checked: DepthChecked,
    pub tolerance: T,
    pub warnings: Vec<Warning<T>>,
}

impl<T: Scalar> Verdict<T> {
    pub fn holds(&self) -> bool {
        self.status == VerdictStatus::Holds
    }

    pub fn fails(&self) -> bool {
        self.status == VerdictStatus::Fails
    }
}

impl fmt::Display for VerdictStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerdictStatus::Holds => write!(f, "Holds"),
            VerdictStatus::Fails => write!(f, "Fails"),
            VerdictStatus::Unknown => write!(f, "Unknown"),
        }
    }
}

impl<T: Scalar> fmt::Display for Verdict<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.status)?;
        match self.depth_checked {
            DepthChecked::Bounded(d) => write!(f, " (to depth {d})")?,
            DepthChecked::Exhaustive => write!(f, " (exact)")?,
        }
        if let Some(w) = &self.witness {
            write!(f, "; witness history {}", w.history)?;
            if let Some(dev) = &w.deviation {
                write!(f, ", optimal deviation {dev}")?;
            }
        }
        for warning in &self.warnings {
            match warning {
                Warning::ApproximateUtility { tail_bound } => {
                    write!(f, "; warning: approximate utility (tail bound {tail_bound})")?
                }
                Warning::NumericallyMarginal { margin } => {
                    write!(f, "; warning: numerically marginal (margin {margin})")?
                }
            }
        }
        Ok(())
    }
}
