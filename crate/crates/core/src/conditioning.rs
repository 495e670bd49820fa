//! Conditioning a game on an index set.
//!
//! `condition(A, h)` is the game whose strategies are tables `A -> Σ_h`: it
//! reacts to every element of `A` with its own strategy of `h`, and a table
//! is optimal only when every component is optimal for its slice of the
//! continuation. This is the engine's encoding of subgame perfection: indices
//! that never actually occur still constrain optimality.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::finset::FinSet;
use crate::game::{Continuation, CoutilityFn, EquilibriumFn, OpenGame, PlayFn};
use crate::scalar::Scalar;
use crate::two_cells::GameMorphism;
use crate::value::Value;

/// Strategy tables are materialized eagerly; conditioning refuses to build
/// more than this many.
pub const MAX_CONDITIONED_STRATEGIES: usize = 1_000_000;

/// Conditions `h : (X,S) -> (Y,R)` on `index`, yielding a game
/// `(A x X, S) -> (A x Y, R)` whose strategies are all tables `A -> Σ_h`.
pub fn condition<T: Scalar>(index: &FinSet<T>, h: &OpenGame<T>) -> Result<OpenGame<T>> {
    if index.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    let strategies = FinSet::new(FinSet::tables(
        index,
        h.strategies(),
        MAX_CONDITIONED_STRATEGIES,
    )?)
    .expect("strategy tables are pairwise distinct");

    let states = index.product(h.states());
    let moves = index.product(h.moves());

    let play = {
        let h = h.clone();
        Arc::new(move |table: &Value<T>, state: &Value<T>| {
            let (a, x) = state.expect_pair();
            let component = table
                .table_get(a)
                .unwrap_or_else(|| panic!("strategy table not defined at `{a}`"));
            Value::pair(a.clone(), h.play(component, x))
        }) as PlayFn<T>
    };
    let coutility = {
        let h = h.clone();
        Arc::new(move |table: &Value<T>, state: &Value<T>, r: &Value<T>| {
            let (a, x) = state.expect_pair();
            let component = table
                .table_get(a)
                .unwrap_or_else(|| panic!("strategy table not defined at `{a}`"));
            h.coutility(component, x, r)
        }) as CoutilityFn<T>
    };
    // Optimality quantifies over every index, not just the one in the state:
    // each component must be optimal for the continuation slice at its index.
    let equilibrium = {
        let h = h.clone();
        let index = index.clone();
        Arc::new(move |state: &Value<T>, k: &Continuation<T>, table: &Value<T>| {
            let (_, x) = state.expect_pair();
            index.iter().all(|a| {
                let slice = Continuation::from_fn(h.moves(), |y| {
                    k.get(&Value::pair(a.clone(), y.clone())).clone()
                });
                let component = table
                    .table_get(a)
                    .unwrap_or_else(|| panic!("strategy table not defined at `{a}`"));
                h.is_equilibrium(x, &slice, component)
            })
        }) as EquilibriumFn<T>
    };

    Ok(OpenGame::new(
        states,
        h.coutility_carrier().clone(),
        moves,
        h.utility_carrier().clone(),
        strategies,
        play,
        coutility,
        equilibrium,
    )
    .with_affine_invariance(h.affine_invariant()))
}

/// Lifts a morphism `alpha : h -> h'` to `condition(A, h) -> condition(A, h')`:
/// `id_A x alpha_Y` on moves and post-composition with `alpha_Σ` on tables.
///
/// `h` and `h'` are the games `alpha` runs between; they are needed to
/// materialize the lifted maps. Totality and play preservation of `alpha`
/// are validated here; run `check_morphism` for the full equilibrium
/// condition.
pub fn condition_on_morphism<T: Scalar>(
    index: &FinSet<T>,
    alpha: &GameMorphism<T>,
    h: &OpenGame<T>,
    h_prime: &OpenGame<T>,
) -> Result<GameMorphism<T>> {
    if index.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    alpha.validate_against(h, h_prime)?;
    if let Some(witness) = crate::two_cells::play_violation(alpha, h, h_prime) {
        return Err(Error::InvalidMorphism {
            reason: format!("play preservation fails: {witness:?}"),
        });
    }

    let mut alpha_moves = std::collections::BTreeMap::new();
    for a in index.iter() {
        for y in h.moves().iter() {
            let image = alpha.apply_move(y)?;
            alpha_moves.insert(
                Value::pair(a.clone(), y.clone()),
                Value::pair(a.clone(), image),
            );
        }
    }

    let tables = FinSet::tables(index, h.strategies(), MAX_CONDITIONED_STRATEGIES)?;
    let mut alpha_strategies = std::collections::BTreeMap::new();
    for table in tables {
        let entries = table
            .as_table()
            .expect("strategy is a table")
            .iter()
            .map(|(a, component)| Ok((a.clone(), alpha.apply_strategy(component)?)))
            .collect::<Result<Vec<_>>>()?;
        let image = Value::table(entries).expect("index elements are distinct");
        alpha_strategies.insert(table, image);
    }

    Ok(GameMorphism::new(alpha_moves, alpha_strategies))
}
