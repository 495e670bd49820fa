//! Morphisms between coutility-free games, and the one-round-extension
//! functor used to build iterated games.
//!
//! A coutility-free game has the one-point state set, equal utility and
//! coutility carriers, and coutility that just hands the utility back. A
//! morphism between two such games is a pair of maps (on moves and on
//! strategies) that preserves play and transports equilibria; both conditions
//! are checked mechanically, the second by exhausting (or sampling) the
//! continuation space.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::conditioning::condition;
use crate::error::{Error, Result};
use crate::finset::{Carrier, FinSet};
use crate::game::{compose, Continuation, EquilibriumFn, OpenGame};
use crate::scalar::Scalar;
use crate::value::Value;

/// Default cap on the number of continuations the exhaustive check walks.
pub const DEFAULT_ENUMERATION_GUARD: usize = 1_000_000;

/// An open game `(1, R) -> (Y, R)` whose coutility is the projection onto
/// the utility. The restriction that makes games iterable.
#[derive(Debug, Clone)]
pub struct CoutilityFreeGame<T: Scalar> {
    game: OpenGame<T>,
}

impl<T: Scalar> CoutilityFreeGame<T> {
    /// Validates the coutility-free shape: the state set is `{()}`, the
    /// coutility carrier equals the utility carrier label-for-label, and
    /// coutility is extensionally the projection onto its utility argument
    /// (checked over the whole carrier when finite, over probe vectors when
    /// numeric).
    pub fn try_new(game: OpenGame<T>) -> Result<Self> {
        if *game.states() != FinSet::unit() {
            return Err(Error::InvalidParameter {
                what: "coutility-free game",
                message: format!("state set must be {{()}}, found {}", game.states()),
            });
        }
        if game.coutility_carrier() != game.utility_carrier() {
            return Err(Error::InvalidParameter {
                what: "coutility-free game",
                message: format!(
                    "coutility carrier {} differs from utility carrier {}",
                    game.coutility_carrier(),
                    game.utility_carrier()
                ),
            });
        }
        let unit = Value::Unit;
        for sigma in game.strategies().iter() {
            for r in probe_values(game.utility_carrier()) {
                if game.coutility(sigma, &unit, &r) != r {
                    return Err(Error::InvalidParameter {
                        what: "coutility-free game",
                        message: format!(
                            "coutility is not the projection at strategy `{sigma}`, utility `{r}`"
                        ),
                    });
                }
            }
        }
        Ok(CoutilityFreeGame { game })
    }

    /// Builds a coutility-free game from a play table and an equilibrium
    /// predicate.
    pub fn from_parts(
        moves: FinSet<T>,
        utility: Carrier<T>,
        strategies: FinSet<T>,
        play: BTreeMap<Value<T>, Value<T>>,
        equilibrium: EquilibriumFn<T>,
    ) -> Result<Self> {
        for sigma in strategies.iter() {
            let y = play.get(sigma).ok_or_else(|| Error::MissingEntry {
                function: "play",
                key: sigma.to_string(),
            })?;
            if !moves.contains(y) {
                return Err(Error::UnknownMove {
                    label: y.to_string(),
                });
            }
        }
        let play_fn = Arc::new(move |sigma: &Value<T>, _x: &Value<T>| {
            play.get(sigma)
                .cloned()
                .unwrap_or_else(|| panic!("play not defined at `{sigma}`"))
        });
        let game = OpenGame::new(
            FinSet::unit(),
            utility.clone(),
            moves,
            utility,
            strategies,
            play_fn,
            Arc::new(|_, _, r| r.clone()),
            equilibrium,
        );
        Ok(CoutilityFreeGame { game })
    }

    pub fn as_game(&self) -> &OpenGame<T> {
        &self.game
    }

    pub fn into_game(self) -> OpenGame<T> {
        self.game
    }

    pub fn moves(&self) -> &FinSet<T> {
        self.game.moves()
    }

    pub fn utility_carrier(&self) -> &Carrier<T> {
        self.game.utility_carrier()
    }

    pub fn strategies(&self) -> &FinSet<T> {
        self.game.strategies()
    }

    /// Play at the unique state.
    pub fn play_of(&self, strategy: &Value<T>) -> Value<T> {
        self.game.play(strategy, &Value::Unit)
    }

    pub fn is_equilibrium(&self, continuation: &Continuation<T>, strategy: &Value<T>) -> bool {
        self.game.is_equilibrium(&Value::Unit, continuation, strategy)
    }

    pub fn equilibrium_set(&self, continuation: &Continuation<T>) -> Result<Vec<Value<T>>> {
        self.game.equilibrium_set(&Value::Unit, continuation)
    }
}

/// Deterministic sample of carrier elements used to validate the projection
/// law on carriers that cannot be exhausted.
fn probe_values<T: Scalar>(carrier: &Carrier<T>) -> Vec<Value<T>> {
    match carrier {
        Carrier::Finite(set) => set.iter().cloned().collect(),
        Carrier::Numeric { dim } => {
            let mut probes = vec![
                Value::num(vec![T::zero(); *dim]),
                Value::num(vec![T::one(); *dim]),
                Value::num((0..*dim).map(|i| T::from_f64_lossy(0.5 + i as f64))),
            ];
            for i in 0..*dim {
                let mut basis = vec![T::zero(); *dim];
                basis[i] = -T::one();
                probes.push(Value::num(basis));
            }
            probes
        }
        Carrier::Product(a, b) => {
            let left = probe_values(a);
            let right = probe_values(b);
            let mut probes = Vec::new();
            for l in left.iter().take(4) {
                for r in right.iter().take(4) {
                    probes.push(Value::pair(l.clone(), r.clone()));
                }
            }
            probes
        }
    }
}

/// A candidate morphism between two games: a map on moves and a map on
/// strategies. Validity is established only by [`check_morphism`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameMorphism<T: Scalar> {
    pub alpha_moves: BTreeMap<Value<T>, Value<T>>,
    pub alpha_strategies: BTreeMap<Value<T>, Value<T>>,
}

impl<T: Scalar> GameMorphism<T> {
    pub fn new(
        alpha_moves: BTreeMap<Value<T>, Value<T>>,
        alpha_strategies: BTreeMap<Value<T>, Value<T>>,
    ) -> Self {
        GameMorphism {
            alpha_moves,
            alpha_strategies,
        }
    }

    pub fn identity(game: &OpenGame<T>) -> Self {
        GameMorphism {
            alpha_moves: game.moves().iter().map(|y| (y.clone(), y.clone())).collect(),
            alpha_strategies: game
                .strategies()
                .iter()
                .map(|s| (s.clone(), s.clone()))
                .collect(),
        }
    }

    /// `second . first`, defined when the maps chain.
    pub fn compose(second: &GameMorphism<T>, first: &GameMorphism<T>) -> Result<GameMorphism<T>> {
        let chain = |outer: &BTreeMap<Value<T>, Value<T>>,
                     inner: &BTreeMap<Value<T>, Value<T>>,
                     what: &'static str|
         -> Result<BTreeMap<Value<T>, Value<T>>> {
            inner
                .iter()
                .map(|(k, mid)| {
                    let end = outer.get(mid).ok_or_else(|| Error::InvalidMorphism {
                        reason: format!("{what} maps do not chain at `{mid}`"),
                    })?;
                    Ok((k.clone(), end.clone()))
                })
                .collect()
        };
        Ok(GameMorphism {
            alpha_moves: chain(&second.alpha_moves, &first.alpha_moves, "move")?,
            alpha_strategies: chain(&second.alpha_strategies, &first.alpha_strategies, "strategy")?,
        })
    }

    pub fn apply_move(&self, y: &Value<T>) -> Result<Value<T>> {
        self.alpha_moves
            .get(y)
            .cloned()
            .ok_or_else(|| Error::InvalidMorphism {
                reason: format!("move map not defined at `{y}`"),
            })
    }

    pub fn apply_strategy(&self, sigma: &Value<T>) -> Result<Value<T>> {
        self.alpha_strategies
            .get(sigma)
            .cloned()
            .ok_or_else(|| Error::InvalidMorphism {
                reason: format!("strategy map not defined at `{sigma}`"),
            })
    }

    /// Totality and codomain checks against a source and target game.
    pub fn validate_against(&self, source: &OpenGame<T>, target: &OpenGame<T>) -> Result<()> {
        if source.states() != target.states() {
            return Err(Error::InvalidMorphism {
                reason: format!(
                    "games have different state sets ({} vs {})",
                    source.states(),
                    target.states()
                ),
            });
        }
        if source.utility_carrier() != target.utility_carrier() {
            return Err(Error::InvalidMorphism {
                reason: format!(
                    "games have different utility carriers ({} vs {})",
                    source.utility_carrier(),
                    target.utility_carrier()
                ),
            });
        }
        for y in source.moves().iter() {
            let image = self.apply_move(y)?;
            if !target.moves().contains(&image) {
                return Err(Error::InvalidMorphism {
                    reason: format!("move map sends `{y}` outside the target move set"),
                });
            }
        }
        for sigma in source.strategies().iter() {
            let image = self.apply_strategy(sigma)?;
            if !target.strategies().contains(&image) {
                return Err(Error::InvalidMorphism {
                    reason: format!("strategy map sends `{sigma}` outside the target strategies"),
                });
            }
        }
        Ok(())
    }
}

/// Whether a check exhausted the continuation space or ran on a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    Exhaustive,
    Sampled,
}

/// First violation found by [`check_morphism`], in deterministic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MorphismWitness<T: Scalar> {
    /// Play preservation fails: `alpha_Y(play(sigma)) != play'(alpha_Σ(sigma))`.
    Play { state: Value<T>, strategy: Value<T> },
    /// Equilibrium transport fails: `sigma` is optimal for `k . alpha_Y` but
    /// its image is not optimal for `k`.
    Equilibrium {
        state: Value<T>,
        strategy: Value<T>,
        continuation: Continuation<T>,
    },
}

/// Outcome of a morphism check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MorphismCheck<T: Scalar> {
    Pass { mode: CheckMode },
    Fail { witness: MorphismWitness<T>, mode: CheckMode },
}

impl<T: Scalar> MorphismCheck<T> {
    pub fn passed(&self) -> bool {
        matches!(self, MorphismCheck::Pass { .. })
    }
}

/// Checks the two morphism conditions exhaustively.
///
/// Play preservation is checked for every strategy (and state). Equilibrium
/// transport is checked for every strategy and every continuation
/// `k : Y' -> R`, enumerated lexicographically (target-move order major,
/// utility order minor), so the reported counterexample is deterministic.
/// Requires a finite utility carrier and `|R|^|Y'| <= guard`; callers with
/// numeric utilities use [`check_morphism_sampled`].
pub fn check_morphism<T: Scalar>(
    alpha: &GameMorphism<T>,
    source: &OpenGame<T>,
    target: &OpenGame<T>,
) -> Result<MorphismCheck<T>> {
    check_morphism_guarded(alpha, source, target, DEFAULT_ENUMERATION_GUARD)
}

pub fn check_morphism_guarded<T: Scalar>(
    alpha: &GameMorphism<T>,
    source: &OpenGame<T>,
    target: &OpenGame<T>,
    guard: usize,
) -> Result<MorphismCheck<T>> {
    alpha.validate_against(source, target)?;
    if let Some(witness) = play_violation(alpha, source, target) {
        return Ok(MorphismCheck::Fail {
            witness,
            mode: CheckMode::Exhaustive,
        });
    }

    let utilities = target
        .utility_carrier()
        .as_finite()
        .ok_or_else(|| Error::InvalidParameter {
            what: "morphism check",
            message: "utility carrier is not finite; supply a continuation sample".into(),
        })?;
    let total = (utilities.len() as u128)
        .checked_pow(target.moves().len() as u32)
        .unwrap_or(u128::MAX);
    if total > guard as u128 {
        return Err(Error::EnumerationTooLarge { size: total, guard });
    }

    // The continuation space is partitioned across workers; reporting the
    // lowest violating index keeps the witness independent of thread count.
    let base = utilities.len().max(1);
    let width = target.moves().len();
    let hit = (0..total as usize)
        .into_par_iter()
        .find_first(|&idx| {
            let k = continuation_at_index(idx, base, width, target.moves(), utilities);
            equilibrium_violation(alpha, source, target, &k).is_some()
        });
    match hit {
        None => Ok(MorphismCheck::Pass {
            mode: CheckMode::Exhaustive,
        }),
        Some(idx) => {
            let k = continuation_at_index(idx, base, width, target.moves(), utilities);
            let witness = equilibrium_violation(alpha, source, target, &k)
                .expect("violation found above");
            Ok(MorphismCheck::Fail {
                witness,
                mode: CheckMode::Exhaustive,
            })
        }
    }
}

/// Checks the morphism conditions against a caller-supplied continuation
/// sample; the result is labeled [`CheckMode::Sampled`].
pub fn check_morphism_sampled<T: Scalar>(
    alpha: &GameMorphism<T>,
    source: &OpenGame<T>,
    target: &OpenGame<T>,
    continuations: &[Continuation<T>],
) -> Result<MorphismCheck<T>> {
    alpha.validate_against(source, target)?;
    if let Some(witness) = play_violation(alpha, source, target) {
        return Ok(MorphismCheck::Fail {
            witness,
            mode: CheckMode::Sampled,
        });
    }
    for k in continuations {
        if let Some(witness) = equilibrium_violation(alpha, source, target, k) {
            return Ok(MorphismCheck::Fail {
                witness,
                mode: CheckMode::Sampled,
            });
        }
    }
    Ok(MorphismCheck::Pass {
        mode: CheckMode::Sampled,
    })
}

pub(crate) fn play_violation<T: Scalar>(
    alpha: &GameMorphism<T>,
    source: &OpenGame<T>,
    target: &OpenGame<T>,
) -> Option<MorphismWitness<T>> {
    for x in source.states().iter() {
        for sigma in source.strategies().iter() {
            let lhs = alpha
                .apply_move(&source.play(sigma, x))
                .expect("validated total");
            let rhs = target.play(
                &alpha.apply_strategy(sigma).expect("validated total"),
                x,
            );
            if lhs != rhs {
                return Some(MorphismWitness::Play {
                    state: x.clone(),
                    strategy: sigma.clone(),
                });
            }
        }
    }
    None
}

fn equilibrium_violation<T: Scalar>(
    alpha: &GameMorphism<T>,
    source: &OpenGame<T>,
    target: &OpenGame<T>,
    k: &Continuation<T>,
) -> Option<MorphismWitness<T>> {
    let pulled = Continuation::from_fn(source.moves(), |y| {
        k.get(&alpha.apply_move(y).expect("validated total")).clone()
    });
    for x in source.states().iter() {
        for sigma in source.strategies().iter() {
            if source.is_equilibrium(x, &pulled, sigma) {
                let image = alpha.apply_strategy(sigma).expect("validated total");
                if !target.is_equilibrium(x, k, &image) {
                    return Some(MorphismWitness::Equilibrium {
                        state: x.clone(),
                        strategy: sigma.clone(),
                        continuation: k.clone(),
                    });
                }
            }
        }
    }
    None
}

fn continuation_at_index<T: Scalar>(
    mut idx: usize,
    base: usize,
    width: usize,
    moves: &FinSet<T>,
    utilities: &FinSet<T>,
) -> Continuation<T> {
    let mut digits = vec![0usize; width];
    for slot in (0..width).rev() {
        digits[slot] = idx % base;
        idx /= base;
    }
    Continuation::from_fn(moves, |y| {
        let slot = moves.position(y).expect("move is in the set");
        utilities.get(digits[slot]).expect("digit in range").clone()
    })
}

/// One round of `g` followed by `h` conditioned on `g`'s move: the composite
/// `condition(Y_g, h) . g`, a coutility-free game over `(Y_g x Y_h, R)` with
/// strategy set `Σ_g x (Y_g -> Σ_h)`. Iterating a game is taking the greatest
/// solution of `H = step_game(g, H)`.
pub fn step_game<T: Scalar>(
    g: &CoutilityFreeGame<T>,
    h: &CoutilityFreeGame<T>,
) -> Result<CoutilityFreeGame<T>> {
    if g.utility_carrier() != h.utility_carrier() {
        return Err(Error::BoundaryMismatch {
            context: "step_game",
            expected: g.utility_carrier().to_string(),
            found: h.utility_carrier().to_string(),
        });
    }
    let conditioned = condition(g.moves(), h.as_game())?;
    // condition() produces states Y x {()}; rebase to Y so it composes with g.
    let rebased = conditioned
        .reindex_states(g.moves().clone(), |y| Value::pair(y.clone(), Value::Unit));
    let composed = compose(g.as_game(), &rebased)?;
    let flag = g.as_game().affine_invariant() && h.as_game().affine_invariant();
    CoutilityFreeGame::try_new(composed.with_affine_invariance(flag))
}

/// Functorial action of [`step_game`] on a morphism `alpha : h -> h'`:
/// `(sigma, f) |-> (sigma, alpha_Σ . f)` on strategies and
/// `(y, z) |-> (y, alpha_Y(z))` on moves.
pub fn step_morphism<T: Scalar>(
    g: &CoutilityFreeGame<T>,
    alpha: &GameMorphism<T>,
    h: &CoutilityFreeGame<T>,
    h_prime: &CoutilityFreeGame<T>,
) -> Result<GameMorphism<T>> {
    alpha.validate_against(h.as_game(), h_prime.as_game())?;
    if let Some(witness) = play_violation(alpha, h.as_game(), h_prime.as_game()) {
        return Err(Error::InvalidMorphism {
            reason: format!("play preservation fails: {witness:?}"),
        });
    }

    let mut alpha_moves = BTreeMap::new();
    for y in g.moves().iter() {
        for z in h.moves().iter() {
            alpha_moves.insert(
                Value::pair(y.clone(), z.clone()),
                Value::pair(y.clone(), alpha.apply_move(z)?),
            );
        }
    }

    let tables = FinSet::tables(
        g.moves(),
        h.strategies(),
        crate::conditioning::MAX_CONDITIONED_STRATEGIES,
    )?;
    let mut alpha_strategies = BTreeMap::new();
    for sigma in g.strategies().iter() {
        for table in &tables {
            let mapped = Value::table(
                table
                    .as_table()
                    .expect("strategy is a table")
                    .iter()
                    .map(|(y, component)| {
                        Ok((y.clone(), alpha.apply_strategy(component)?))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
            .expect("moves are distinct");
            alpha_strategies.insert(
                Value::pair(sigma.clone(), table.clone()),
                Value::pair(sigma.clone(), mapped),
            );
        }
    }

    Ok(GameMorphism::new(alpha_moves, alpha_strategies))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::argmax_decision;

    fn labels(ls: &[&str]) -> FinSet<f64> {
        FinSet::from_labels(ls.to_vec()).unwrap()
    }

    fn numeric_labels(vals: &[f64]) -> FinSet<f64> {
        FinSet::new(vals.iter().map(|&v| Value::scalar(v))).unwrap()
    }

    #[test]
    fn identity_morphism_passes() {
        let g = argmax_decision(&labels(&["a", "b"]), Carrier::finite(numeric_labels(&[0.0, 1.0])), 1e-9)
            .unwrap();
        let id = GameMorphism::identity(g.as_game());
        let outcome = check_morphism(&id, g.as_game(), g.as_game()).unwrap();
        assert!(outcome.passed());
    }

    #[test]
    fn collapsing_different_plays_fails_play_condition() {
        // Two strategies with different plays collapsed onto one strategy.
        let moves = labels(&["a", "b"]);
        let r = Carrier::finite(numeric_labels(&[0.0, 1.0]));
        let g = argmax_decision(&moves, r.clone(), 1e-9).unwrap();
        let collapse = GameMorphism::new(
            moves.iter().map(|y| (y.clone(), y.clone())).collect(),
            [
                (Value::sym("a"), Value::sym("a")),
                (Value::sym("b"), Value::sym("a")),
            ]
            .into_iter()
            .collect(),
        );
        match check_morphism(&collapse, g.as_game(), g.as_game()).unwrap() {
            MorphismCheck::Fail {
                witness: MorphismWitness::Play { strategy, .. },
                ..
            } => assert_eq!(strategy, Value::sym("b")),
            other => panic!("expected a play-condition failure, got {other:?}"),
        }
    }

    #[test]
    fn swap_morphism_passes_exhaustively() {
        // alpha_Y swaps moves and alpha_Σ swaps strategies between two 2-move
        // argmax decisions; verified over all |R|^2 = 9 continuations.
        let moves = labels(&["a", "b"]);
        let r = Carrier::finite(numeric_labels(&[0.0, 1.0, 2.0]));
        let g = argmax_decision(&moves, r, 1e-9).unwrap();
        let swap: BTreeMap<_, _> = [
            (Value::sym("a"), Value::sym("b")),
            (Value::sym("b"), Value::sym("a")),
        ]
        .into_iter()
        .collect();
        let alpha = GameMorphism::new(swap.clone(), swap);
        let outcome = check_morphism(&alpha, g.as_game(), g.as_game()).unwrap();
        assert!(outcome.passed());
    }

    #[test]
    fn guard_overflow_reported() {
        let moves = FinSet::from_labels((0..8).map(|i| format!("m{i}"))).unwrap();
        let r = Carrier::finite(numeric_labels(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]));
        let g = argmax_decision(&moves, r, 1e-9).unwrap();
        let id = GameMorphism::identity(g.as_game());
        let err = check_morphism(&id, g.as_game(), g.as_game()).unwrap_err();
        assert_eq!(err.kind(), "enumeration_too_large");
    }

    #[test]
    fn step_game_counts_strategies_and_moves() {
        let r = Carrier::numeric(1);
        let g = argmax_decision(&labels(&["a", "b"]), r.clone(), 1e-9).unwrap();
        let h = argmax_decision(&labels(&["u", "v"]), r, 1e-9).unwrap();
        let stepped = step_game(&g, &h).unwrap();
        // |Σ_g| * |Σ_h|^|Y_g| = 2 * 2^2
        assert_eq!(stepped.strategies().len(), 8);
        assert_eq!(stepped.moves().len(), 4);
        assert_eq!(*stepped.as_game().states(), FinSet::unit());
    }

    #[test]
    fn step_on_one_strategy_game_keeps_base_strategy_count() {
        let r = Carrier::numeric(1);
        let g = argmax_decision(&labels(&["a", "b"]), r.clone(), 1e-9).unwrap();
        let h = argmax_decision(&labels(&["only"]), r, 1e-9).unwrap();
        let stepped = step_game(&g, &h).unwrap();
        assert_eq!(stepped.strategies().len(), g.strategies().len());
    }

    #[test]
    fn step_morphism_is_functorial() {
        let r = Carrier::finite(numeric_labels(&[0.0, 1.0]));
        let g = argmax_decision(&labels(&["a", "b"]), r.clone(), 1e-9).unwrap();
        let h = argmax_decision(&labels(&["u", "v"]), r, 1e-9).unwrap();

        let id = GameMorphism::identity(h.as_game());
        let stepped_id = step_morphism(&g, &id, &h, &h).unwrap();
        let target = step_game(&g, &h).unwrap();
        assert_eq!(stepped_id, GameMorphism::identity(target.as_game()));

        let swap: BTreeMap<_, _> = [
            (Value::sym("u"), Value::sym("v")),
            (Value::sym("v"), Value::sym("u")),
        ]
        .into_iter()
        .collect();
        let alpha = GameMorphism::new(swap.clone(), swap);
        let stepped_swap = step_morphism(&g, &alpha, &h, &h).unwrap();
        let twice = step_morphism(
            &g,
            &GameMorphism::compose(&alpha, &alpha).unwrap(),
            &h,
            &h,
        )
        .unwrap();
        assert_eq!(
            twice,
            GameMorphism::compose(&stepped_swap, &stepped_swap).unwrap()
        );
        // The lifted morphism is itself valid.
        let outcome = check_morphism(&stepped_swap, target.as_game(), target.as_game()).unwrap();
        assert!(outcome.passed());
    }
}
