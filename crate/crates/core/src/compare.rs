//! Extensional equality of games up to explicit bijections.
//!
//! Monoidal laws hold up to relabeling of strategies (and, for unit laws, of
//! boundary components). Rather than quotienting, games are compared through
//! explicitly constructed bijections: play, coutility, and equilibrium are
//! checked pointwise over the full finite data, with continuations enumerated
//! exhaustively over the codomain.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::finset::FinSet;
use crate::game::{Continuation, OpenGame};
use crate::scalar::Scalar;
use crate::value::Value;

/// Bijections from the components of a "left" game onto those of a "right"
/// game. A `None` component means the two games share that component on the
/// nose, so the identity is used.
#[derive(Debug, Clone)]
pub struct GameIso<T: Scalar> {
    pub strategies: Option<BTreeMap<Value<T>, Value<T>>>,
    pub states: Option<BTreeMap<Value<T>, Value<T>>>,
    pub moves: Option<BTreeMap<Value<T>, Value<T>>>,
    pub utilities: Option<BTreeMap<Value<T>, Value<T>>>,
    pub coutilities: Option<BTreeMap<Value<T>, Value<T>>>,
}

impl<T: Scalar> GameIso<T> {
    /// Identity on every component.
    pub fn identity() -> Self {
        GameIso {
            strategies: None,
            states: None,
            moves: None,
            utilities: None,
            coutilities: None,
        }
    }

    /// Identity everywhere except on strategy sets.
    pub fn strategies_only(bij: BTreeMap<Value<T>, Value<T>>) -> Self {
        GameIso {
            strategies: Some(bij),
            ..GameIso::identity()
        }
    }
}

fn apply<T: Scalar>(bij: &Option<BTreeMap<Value<T>, Value<T>>>, v: &Value<T>) -> Value<T> {
    match bij {
        None => v.clone(),
        Some(map) => map
            .get(v)
            .cloned()
            .unwrap_or_else(|| panic!("bijection not defined at `{v}`")),
    }
}

fn invert<T: Scalar>(
    bij: &Option<BTreeMap<Value<T>, Value<T>>>,
) -> Option<BTreeMap<Value<T>, Value<T>>> {
    bij.as_ref()
        .map(|map| map.iter().map(|(k, v)| (v.clone(), k.clone())).collect())
}

/// Default cap on the number of continuations enumerated per comparison.
pub const DEFAULT_COMPARISON_GUARD: usize = 1_000_000;

/// Checks that `left` and `right` have identical play, coutility, and
/// equilibrium data under `iso`. Returns `None` when they agree, otherwise a
/// description of the first mismatch (in enumeration order).
///
/// Both games must have finite utility and coutility carriers; the
/// equilibrium comparison quantifies over every continuation of the (right)
/// codomain, which must stay within `guard`.
pub fn games_equal_up_to<T: Scalar>(
    left: &OpenGame<T>,
    right: &OpenGame<T>,
    iso: &GameIso<T>,
    guard: usize,
) -> Result<Option<String>> {
    let left_r = left.utility_carrier().as_finite().ok_or_else(|| {
        Error::InvalidParameter {
            what: "game comparison",
            message: "left utility carrier is not finite".into(),
        }
    })?;
    let right_r = right.utility_carrier().as_finite().ok_or_else(|| {
        Error::InvalidParameter {
            what: "game comparison",
            message: "right utility carrier is not finite".into(),
        }
    })?;

    if left.strategies().len() != right.strategies().len()
        || left.states().len() != right.states().len()
        || left.moves().len() != right.moves().len()
        || left_r.len() != right_r.len()
    {
        return Ok(Some("component cardinalities differ".into()));
    }

    let util_inverse = invert(&iso.utilities);
    let pull_utility = |rv: &Value<T>| -> Value<T> {
        match &util_inverse {
            None => rv.clone(),
            Some(map) => map
                .get(rv)
                .cloned()
                .unwrap_or_else(|| panic!("utility bijection not defined at `{rv}`")),
        }
    };

    // Play and coutility, pointwise.
    for sigma in left.strategies().iter() {
        let sigma_r = apply(&iso.strategies, sigma);
        for x in left.states().iter() {
            let x_r = apply(&iso.states, x);
            let y_l = left.play(sigma, x);
            let y_r = right.play(&sigma_r, &x_r);
            if apply(&iso.moves, &y_l) != y_r {
                return Ok(Some(format!(
                    "play differs at strategy `{sigma}`, state `{x}`"
                )));
            }
            for r in left_r.iter() {
                let r_r = apply(&iso.utilities, r);
                let s_l = left.coutility(sigma, x, r);
                let s_r = right.coutility(&sigma_r, &x_r, &r_r);
                if apply(&iso.coutilities, &s_l) != s_r {
                    return Ok(Some(format!(
                        "coutility differs at strategy `{sigma}`, state `{x}`, utility `{r}`"
                    )));
                }
            }
        }
    }

    // Equilibrium, over every continuation of the right codomain.
    let k_space = FinSet::tables(right.moves(), right_r, guard)?;
    for k_table in &k_space {
        let k_right = Continuation::from_fn(right.moves(), |y| {
            k_table.table_get(y).expect("table is total").clone()
        });
        let k_left = Continuation::from_fn(left.moves(), |y| {
            pull_utility(k_right.get(&apply(&iso.moves, y)))
        });
        for x in left.states().iter() {
            let x_r = apply(&iso.states, x);
            for sigma in left.strategies().iter() {
                let sigma_r = apply(&iso.strategies, sigma);
                let in_left = left.is_equilibrium(x, &k_left, sigma);
                let in_right = right.is_equilibrium(&x_r, &k_right, &sigma_r);
                if in_left != in_right {
                    return Ok(Some(format!(
                        "equilibrium differs at state `{x}`, strategy `{sigma}`, \
                         continuation `{k_table}` (left: {in_left}, right: {in_right})"
                    )));
                }
            }
        }
    }

    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finset::Carrier;
    use crate::game::{compose, identity_game};

    #[test]
    fn game_equals_itself() {
        let x = FinSet::<f64>::from_labels(["x0", "x1"]).unwrap();
        let s = FinSet::from_labels(["s0", "s1"]).unwrap();
        let g = identity_game(x, Carrier::finite(s));
        let report =
            games_equal_up_to(&g, &g, &GameIso::identity(), DEFAULT_COMPARISON_GUARD).unwrap();
        assert_eq!(report, None);
    }

    #[test]
    fn unit_law_right_identity() {
        let x = FinSet::<f64>::from_labels(["x0", "x1"]).unwrap();
        let s = FinSet::from_labels(["s0"]).unwrap();
        let g = identity_game(x.clone(), Carrier::finite(s.clone()));
        let composed = compose(&g, &identity_game(x, Carrier::finite(s))).unwrap();
        // sigma |-> (sigma, ())
        let bij = g
            .strategies()
            .iter()
            .map(|sig| (sig.clone(), Value::pair(sig.clone(), Value::Unit)))
            .collect();
        let report = games_equal_up_to(
            &g,
            &composed,
            &GameIso::strategies_only(bij),
            DEFAULT_COMPARISON_GUARD,
        )
        .unwrap();
        assert_eq!(report, None);
    }
}
