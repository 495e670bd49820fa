//! Finitely-evaluable utility functionals over move streams.
//!
//! A utility functional stands in for a map from infinite move streams to a
//! real vector (one coordinate per player). The family is closed under the
//! "consume one move" shift, which is the structural property iteration
//! needs: peeling a move off the stream folds its payoff into an affine
//! offset and rescales, exactly.
//!
//! Representation: `k(stream) = offset + scale * sum_i w_i * u(stream_i)`
//! where the weights `w_i` are `delta^i` (discounted), `1` up to the horizon
//! (finite horizon), or `1/window` up to the window (mean-payoff proxy).
//! Shifting by `y` sets `offset += scale * w_0 * u(y)` and rescales, so
//! `evaluate_prefix(shift(k, y), w)` and `evaluate_prefix(k, y :: w)` perform
//! literally the same float operations and agree bit-for-bit.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::finset::FinSet;
use crate::scalar::Scalar;
use crate::stream::StreamPrefix;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    /// Geometrically discounted sum, `0 <= delta < 1`. Tail bounds shrink to
    /// zero with prefix length.
    Discounted,
    /// Undiscounted sum of the first `horizon` stage payoffs; exact once the
    /// prefix covers the horizon.
    FiniteHorizon,
    /// Window-averaged proxy for the limit average. No finite prefix bounds
    /// the tail, so every verdict derived from it is flagged approximate.
    MeanPayoffApprox,
}

/// Evaluation of a functional on a finite prefix: the value of any stream
/// extending the prefix lies within `tail_bound` of `value`, componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T: Scalar> {
    pub value: Vec<T>,
    pub tail_bound: T,
}

/// An evaluable surrogate for a utility function on move streams.
#[derive(Debug, Clone)]
pub struct UtilityFunctional<T: Scalar> {
    kind: UtilityKind,
    stage_payoff: BTreeMap<Value<T>, Vec<T>>,
    players: usize,
    discount: T,
    /// Stages left before the functional becomes constant (finite horizon and
    /// mean payoff); unused for discounted.
    remaining: usize,
    /// Original window length, the fixed denominator of the mean proxy.
    window: usize,
    offset: Vec<T>,
    scale: T,
}

fn validate_payoff<T: Scalar>(
    stage_payoff: &BTreeMap<Value<T>, Vec<T>>,
) -> Result<usize> {
    let mut players = None;
    if stage_payoff.is_empty() {
        return Err(Error::InvalidParameter {
            what: "stage payoff",
            message: "payoff table is empty".into(),
        });
    }
    for (y, u) in stage_payoff {
        match players {
            None => players = Some(u.len()),
            Some(p) if p == u.len() => {}
            Some(p) => {
                return Err(Error::InvalidParameter {
                    what: "stage payoff",
                    message: format!("payoff at `{y}` has dimension {} but expected {p}", u.len()),
                })
            }
        }
        if u.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                what: "stage payoff",
                message: format!("payoff at `{y}` is not finite"),
            });
        }
    }
    Ok(players.unwrap())
}

impl<T: Scalar> UtilityFunctional<T> {
    pub fn discounted(stage_payoff: BTreeMap<Value<T>, Vec<T>>, discount: T) -> Result<Self> {
        let players = validate_payoff(&stage_payoff)?;
        if !(discount >= T::zero() && discount < T::one()) {
            return Err(Error::InvalidParameter {
                what: "discount",
                message: format!("delta must satisfy 0 <= delta < 1, got {discount}"),
            });
        }
        Ok(UtilityFunctional {
            kind: UtilityKind::Discounted,
            stage_payoff,
            players,
            discount,
            remaining: 0,
            window: 0,
            offset: vec![T::zero(); players],
            scale: T::one(),
        })
    }

    pub fn finite_horizon(stage_payoff: BTreeMap<Value<T>, Vec<T>>, horizon: usize) -> Result<Self> {
        let players = validate_payoff(&stage_payoff)?;
        if horizon == 0 {
            return Err(Error::InvalidParameter {
                what: "horizon",
                message: "horizon must be at least 1".into(),
            });
        }
        Ok(UtilityFunctional {
            kind: UtilityKind::FiniteHorizon,
            stage_payoff,
            players,
            discount: T::zero(),
            remaining: horizon,
            window: horizon,
            offset: vec![T::zero(); players],
            scale: T::one(),
        })
    }

    pub fn mean_payoff(stage_payoff: BTreeMap<Value<T>, Vec<T>>, window: usize) -> Result<Self> {
        let players = validate_payoff(&stage_payoff)?;
        if window == 0 {
            return Err(Error::InvalidParameter {
                what: "window",
                message: "window must be at least 1".into(),
            });
        }
        Ok(UtilityFunctional {
            kind: UtilityKind::MeanPayoffApprox,
            stage_payoff,
            players,
            discount: T::zero(),
            remaining: window,
            window,
            offset: vec![T::zero(); players],
            scale: T::one(),
        })
    }

    /// Applies a positive affine transformation on top of the functional.
    pub fn with_affine(mut self, offset: Vec<T>, scale: T) -> Result<Self> {
        if offset.len() != self.players {
            return Err(Error::InvalidParameter {
                what: "affine offset",
                message: format!(
                    "offset has dimension {} but the payoff has {} players",
                    offset.len(),
                    self.players
                ),
            });
        }
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::InvalidParameter {
                what: "affine scale",
                message: format!("scale must be positive and finite, got {scale}"),
            });
        }
        self.offset = offset;
        self.scale = scale;
        Ok(self)
    }

    pub fn kind(&self) -> UtilityKind {
        self.kind
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn horizon(&self) -> usize {
        self.remaining
    }

    pub fn offset(&self) -> &[T] {
        &self.offset
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn stage_payoff(&self) -> &BTreeMap<Value<T>, Vec<T>> {
        &self.stage_payoff
    }

    pub fn payoff_of(&self, y: &Value<T>) -> Result<&Vec<T>> {
        self.stage_payoff.get(y).ok_or_else(|| Error::UnknownMove {
            label: y.to_string(),
        })
    }

    /// Checks the payoff table covers a move set.
    pub fn validate_moves(&self, moves: &FinSet<T>) -> Result<()> {
        for y in moves.iter() {
            self.payoff_of(y)?;
        }
        Ok(())
    }

    pub fn max_abs_payoff(&self) -> T {
        self.stage_payoff
            .values()
            .flat_map(|u| u.iter())
            .fold(T::zero(), |acc, c| acc.max(c.abs()))
    }

    /// Weight of the next stage payoff in the current state of the functional.
    fn head_weight(&self) -> T {
        match self.kind {
            UtilityKind::Discounted => T::one(),
            UtilityKind::FiniteHorizon => {
                if self.remaining > 0 {
                    T::one()
                } else {
                    T::zero()
                }
            }
            UtilityKind::MeanPayoffApprox => {
                if self.remaining > 0 {
                    T::one() / T::from_usize(self.window).unwrap()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// The functional on streams with the first move fixed to `y`: folds the
    /// payoff of `y` into the affine part. Exact for every kind.
    pub fn shift(&self, y: &Value<T>) -> Result<Self> {
        let u = self.payoff_of(y)?.clone();
        match self.kind {
            UtilityKind::Discounted => {
                let mut next = self.clone();
                let w = self.head_weight();
                for (o, c) in next.offset.iter_mut().zip(u.iter()) {
                    *o = *o + self.scale * w * *c;
                }
                next.scale = self.scale * self.discount;
                Ok(next)
            }
            UtilityKind::FiniteHorizon | UtilityKind::MeanPayoffApprox => {
                if self.remaining == 0 {
                    return Err(Error::HorizonExhausted);
                }
                let mut next = self.clone();
                let w = self.head_weight();
                for (o, c) in next.offset.iter_mut().zip(u.iter()) {
                    *o = *o + self.scale * w * *c;
                }
                next.remaining = self.remaining - 1;
                Ok(next)
            }
        }
    }

    /// Evaluates the functional on `prefix`, together with a bound on how far
    /// any infinite extension can move the value.
    pub fn evaluate_prefix(&self, prefix: &StreamPrefix<T>) -> Result<Evaluation<T>> {
        if self.kind == UtilityKind::MeanPayoffApprox && prefix.is_empty() {
            return Err(Error::EmptyPrefix);
        }
        let mut current = self.clone();
        for y in prefix.iter() {
            if matches!(
                current.kind,
                UtilityKind::FiniteHorizon | UtilityKind::MeanPayoffApprox
            ) && current.remaining == 0
            {
                // The functional is constant beyond its horizon; the rest of
                // the prefix cannot change the value.
                break;
            }
            current = current.shift(y)?;
        }
        Ok(Evaluation {
            value: current.offset.clone(),
            tail_bound: current.tail_bound(),
        })
    }

    /// Bound on the total weight the un-consumed tail can still contribute.
    pub fn tail_bound(&self) -> T {
        let maxu = self.max_abs_payoff();
        match self.kind {
            UtilityKind::Discounted => {
                self.scale.abs() * maxu / (T::one() - self.discount)
            }
            UtilityKind::FiniteHorizon => {
                self.scale.abs() * T::from_usize(self.remaining).unwrap() * maxu
            }
            UtilityKind::MeanPayoffApprox => {
                // A finite prefix never determines the limit average.
                T::infinity()
            }
        }
    }

    /// Smallest prefix length whose tail bound is at most `epsilon`, if one
    /// exists below `cap`.
    pub fn prefix_length_for(&self, epsilon: T, cap: usize) -> Option<usize> {
        match self.kind {
            UtilityKind::MeanPayoffApprox => None,
            UtilityKind::FiniteHorizon => {
                if self.remaining <= cap {
                    Some(self.remaining)
                } else {
                    None
                }
            }
            UtilityKind::Discounted => {
                let maxu = self.max_abs_payoff();
                let mut scale = self.scale.abs();
                let denom = T::one() - self.discount;
                for len in 0..=cap {
                    if scale * maxu / denom <= epsilon {
                        return Some(len);
                    }
                    scale = scale * self.discount;
                }
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pd_payoff() -> BTreeMap<Value<f64>, Vec<f64>> {
        // Standard prisoner's dilemma move pairs with T=5, R=3, P=1, S=0.
        let m = |a: &str, b: &str| Value::pair(Value::sym(a), Value::sym(b));
        [
            (m("C", "C"), vec![3.0, 3.0]),
            (m("C", "D"), vec![0.0, 5.0]),
            (m("D", "C"), vec![5.0, 0.0]),
            (m("D", "D"), vec![1.0, 1.0]),
        ]
        .into_iter()
        .collect()
    }

    fn prefix(moves: &[(&str, &str)]) -> StreamPrefix<f64> {
        StreamPrefix::new(
            moves
                .iter()
                .map(|&(a, b)| Value::pair(Value::sym(a), Value::sym(b)))
                .collect(),
        )
    }

    #[test]
    fn zero_discount_is_first_move_only() {
        let k = UtilityFunctional::discounted(pd_payoff(), 0.0).unwrap();
        let w = prefix(&[("D", "C"), ("C", "C"), ("C", "C")]);
        let eval = k.evaluate_prefix(&w).unwrap();
        assert_eq!(eval.value, vec![5.0, 0.0]);
        assert_eq!(eval.tail_bound, 0.0);
    }

    #[test]
    fn constant_payoff_approaches_geometric_limit() {
        let payoff: BTreeMap<Value<f64>, Vec<f64>> =
            [(Value::sym("c"), vec![2.0])].into_iter().collect();
        let k = UtilityFunctional::discounted(payoff, 0.5).unwrap();
        let w = StreamPrefix::new(vec![Value::sym("c"); 40]);
        let eval = k.evaluate_prefix(&w).unwrap();
        // 2 / (1 - 0.5) = 4, approached within the reported tail bound.
        assert!((eval.value[0] - 4.0).abs() <= eval.tail_bound);
        assert!(eval.tail_bound < 1e-10);
    }

    #[test]
    fn pd_cooperation_prefix_matches_direct_summation() {
        // Oracle: direct summation with an explicit running discount factor.
        let k = UtilityFunctional::discounted(pd_payoff(), 0.9).unwrap();
        let w = prefix(&[("C", "C"); 10]);
        let eval = k.evaluate_prefix(&w).unwrap();

        let mut oracle = 0.0f64;
        let mut factor = 1.0f64;
        for _ in 0..10 {
            oracle += factor * 3.0;
            factor *= 0.9;
        }
        assert_eq!(eval.value, vec![oracle, oracle]);
        // Closed form 30 * (1 - 0.9^10), up to float error, within tail bound.
        let closed = 30.0 * (1.0 - 0.9f64.powi(10));
        assert!((eval.value[0] - closed).abs() <= eval.tail_bound.max(1e-9));
        assert!((eval.tail_bound - 0.9f64.powi(10) * 5.0 / 0.1).abs() < 1e-9);
    }

    #[test]
    fn shift_records_payoff_and_rescales() {
        let k = UtilityFunctional::discounted(pd_payoff(), 0.9).unwrap();
        let shifted = k
            .shift(&Value::pair(Value::sym("C"), Value::sym("C")))
            .unwrap();
        assert_eq!(shifted.offset(), &[3.0, 3.0]);
        assert_eq!(shifted.scale(), 0.9);
    }

    #[test]
    fn shift_is_exact_on_prefixes() {
        let k = UtilityFunctional::discounted(pd_payoff(), 0.9).unwrap();
        let y = Value::pair(Value::sym("D"), Value::sym("C"));
        let w = prefix(&[("C", "D"), ("D", "D")]);
        let shifted = k.shift(&y).unwrap().evaluate_prefix(&w).unwrap();
        let consed = k.evaluate_prefix(&w.clone().cons(y)).unwrap();
        assert_eq!(shifted.value, consed.value);
        assert_eq!(shifted.tail_bound, consed.tail_bound);
    }

    #[test]
    fn finite_horizon_becomes_exact() {
        let k = UtilityFunctional::finite_horizon(pd_payoff(), 3).unwrap();
        let w = prefix(&[("C", "C"), ("D", "D"), ("C", "D"), ("D", "C")]);
        let eval = k.evaluate_prefix(&w).unwrap();
        assert_eq!(eval.value, vec![3.0 + 1.0 + 0.0, 3.0 + 1.0 + 5.0]);
        assert_eq!(eval.tail_bound, 0.0);
        // Shifting past the horizon errors.
        let exhausted = k
            .shift(&Value::pair(Value::sym("C"), Value::sym("C")))
            .unwrap()
            .shift(&Value::pair(Value::sym("C"), Value::sym("C")))
            .unwrap()
            .shift(&Value::pair(Value::sym("C"), Value::sym("C")))
            .unwrap();
        let err = exhausted
            .shift(&Value::pair(Value::sym("C"), Value::sym("C")))
            .unwrap_err();
        assert_eq!(err.kind(), "horizon_exhausted");
    }

    #[test]
    fn mean_payoff_requires_nonempty_prefix_and_never_bounds_tails() {
        let k = UtilityFunctional::mean_payoff(pd_payoff(), 4).unwrap();
        let err = k.evaluate_prefix(&StreamPrefix::empty()).unwrap_err();
        assert_eq!(err.kind(), "empty_prefix");
        let eval = k.evaluate_prefix(&prefix(&[("C", "C"), ("D", "D")])).unwrap();
        assert_eq!(eval.value, vec![1.0, 1.0]);
        assert!(eval.tail_bound.is_infinite());
    }

    #[test]
    fn unknown_move_rejected() {
        let k = UtilityFunctional::discounted(pd_payoff(), 0.5).unwrap();
        let err = k.shift(&Value::sym("zzz")).unwrap_err();
        assert_eq!(err.kind(), "unknown_move");
    }

    proptest! {
        #[test]
        fn shift_soundness_bit_identical(
            delta in 0.0f64..0.99,
            seed_moves in proptest::collection::vec(0usize..4, 0..12),
            first in 0usize..4,
        ) {
            let k = UtilityFunctional::discounted(pd_payoff(), delta).unwrap();
            let all: Vec<Value<f64>> = pd_payoff().keys().cloned().collect();
            let w = StreamPrefix::new(seed_moves.iter().map(|&i| all[i].clone()).collect());
            let y = all[first].clone();
            let lhs = k.shift(&y).unwrap().evaluate_prefix(&w).unwrap();
            let rhs = k.evaluate_prefix(&w.clone().cons(y)).unwrap();
            prop_assert_eq!(lhs.value, rhs.value);
        }

        #[test]
        fn tail_bound_sound_for_extension_pairs(
            delta in 0.0f64..0.95,
            stem in proptest::collection::vec(0usize..4, 0..6),
            ext_a in proptest::collection::vec(0usize..4, 30),
            ext_b in proptest::collection::vec(0usize..4, 30),
        ) {
            let k = UtilityFunctional::discounted(pd_payoff(), delta).unwrap();
            let all: Vec<Value<f64>> = pd_payoff().keys().cloned().collect();
            let to_prefix = |ids: &[usize]| {
                StreamPrefix::<f64>::new(ids.iter().map(|&i| all[i].clone()).collect())
            };
            let stem_p = to_prefix(&stem);
            let bound = k.evaluate_prefix(&stem_p).unwrap().tail_bound;
            let long_a = to_prefix(&stem.iter().chain(ext_a.iter()).copied().collect::<Vec<_>>());
            let long_b = to_prefix(&stem.iter().chain(ext_b.iter()).copied().collect::<Vec<_>>());
            let va = k.evaluate_prefix(&long_a).unwrap().value;
            let vb = k.evaluate_prefix(&long_b).unwrap().value;
            for (a, b) in va.iter().zip(vb.iter()) {
                prop_assert!((a - b).abs() <= 2.0 * bound + 1e-12);
            }
        }

        #[test]
        fn scale_stays_positive_under_shifts(
            delta in 0.01f64..0.99,
            moves in proptest::collection::vec(0usize..4, 1..20),
        ) {
            let all: Vec<Value<f64>> = pd_payoff().keys().cloned().collect();
            let mut k = UtilityFunctional::discounted(pd_payoff(), delta).unwrap()
                .with_affine(vec![1.0, -2.0], 3.0).unwrap();
            for &i in &moves {
                k = k.shift(&all[i]).unwrap();
                prop_assert!(k.scale() > 0.0);
            }
        }
    }
}
