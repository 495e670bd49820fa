//! Scalar abstraction for the numeric layer.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used for payoffs, discount factors, and tolerances.
///
/// Blanket-implemented for `f32` and `f64`; the symbolic game machinery is
/// independent of the choice, the numeric layer (utility functionals,
/// equilibrium tolerances, geometric sums) computes in `T`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Total order used wherever scalars appear inside set elements or map
    /// keys. NaN sorts after every other value and equals itself, so the
    /// derived container orderings stay lawful even on garbage input.
    fn total_order(&self, other: &Self) -> Ordering {
        match self.partial_cmp(other) {
            Some(ord) => ord,
            None => match (self.is_nan(), other.is_nan()) {
                (true, true) => Ordering::Equal,
                (true, false) => Ordering::Greater,
                (false, true) => Ordering::Less,
                (false, false) => unreachable!("partial_cmp failed on non-NaN floats"),
            },
        }
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_order_handles_nan() {
        assert_eq!(1.0f64.total_order(&2.0), Ordering::Less);
        assert_eq!(f64::NAN.total_order(&f64::NAN), Ordering::Equal);
        assert_eq!(f64::NAN.total_order(&1.0), Ordering::Greater);
        assert_eq!(1.0f64.total_order(&f64::NAN), Ordering::Less);
    }
}
