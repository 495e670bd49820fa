//! Stock stage games and repeated-game strategies.
//!
//! Argmax decisions and bimatrix games are the stage games everything else
//! exercises; both set the affine-invariance flag (best-response sets are
//! unchanged by positive affine maps of the continuation), which licenses the
//! exact membership check in iteration. Named strategies (all-constant, grim
//! trigger, tit-for-tat) are built as transducers against a concrete stage
//! game.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::finset::{Carrier, FinSet};
use crate::game::{Continuation, MarginFn};
use crate::iteration::strategy::{DepthTable, StrategyTransducer};
use crate::scalar::Scalar;
use crate::two_cells::CoutilityFreeGame;
use crate::utility::UtilityFunctional;
use crate::value::Value;

fn scalar_at<T: Scalar>(k: &Continuation<T>, y: &Value<T>, coord: usize) -> T {
    match k.get(y).as_num() {
        Some(v) if coord < v.len() => v[coord],
        _ => panic!("continuation at `{y}` is not numeric with coordinate {coord}"),
    }
}

/// A single utility-maximizing decision over `moves`: strategies are the
/// moves themselves, play is the identity, and a move is optimal when its
/// continuation value is within `epsilon` of the best one.
///
/// `utility` is the utility carrier; pass `Carrier::numeric(1)` for the
/// usual real-valued decision, or a finite set of one-dimensional numeric
/// values when the continuation space must be enumerable (exhaustive
/// morphism checks).
pub fn argmax_decision<T: Scalar>(
    moves: &FinSet<T>,
    utility: Carrier<T>,
    epsilon: T,
) -> Result<CoutilityFreeGame<T>> {
    if moves.is_empty() {
        return Err(Error::EmptyMoveSet);
    }
    match &utility {
        Carrier::Numeric { dim: 1 } => {}
        Carrier::Finite(set) => {
            for v in set.iter() {
                if v.as_num().map_or(true, |n| n.len() != 1) {
                    return Err(Error::InvalidParameter {
                        what: "argmax utility carrier",
                        message: format!("carrier element `{v}` is not a 1-dimensional number"),
                    });
                }
            }
        }
        other => {
            return Err(Error::InvalidParameter {
                what: "argmax utility carrier",
                message: format!("carrier {other} is not scalar"),
            })
        }
    }

    let play: BTreeMap<_, _> = moves.iter().map(|y| (y.clone(), y.clone())).collect();
    // Signed advantage over the best deviation; membership is margin >= -eps
    // and ties within eps of equality get flagged by the callers.
    let margin_moves = moves.clone();
    let margin: MarginFn<T> = Arc::new(move |_x, k: &Continuation<T>, sigma: &Value<T>| {
        let own = scalar_at(k, sigma, 0);
        let best_other = margin_moves
            .iter()
            .filter(|y| *y != sigma)
            .map(|y| scalar_at(k, y, 0))
            .fold(T::neg_infinity(), T::max);
        own - best_other
    });
    let eq_moves = moves.clone();
    let equilibrium = Arc::new(move |_x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
        let own = scalar_at(k, sigma, 0);
        eq_moves.iter().all(|y| own >= scalar_at(k, y, 0) - epsilon)
    });

    let game = CoutilityFreeGame::from_parts(
        moves.clone(),
        utility,
        moves.clone(),
        play,
        equilibrium,
    )?;
    CoutilityFreeGame::try_new(
        game.into_game()
            .with_affine_invariance(true)
            .with_margin(margin)
            .with_builtin_equilibrium("argmax", epsilon),
    )
}

/// A two-player normal-form game given by move sets and a payoff table.
#[derive(Debug, Clone)]
pub struct Bimatrix<T: Scalar> {
    moves1: FinSet<T>,
    moves2: FinSet<T>,
    payoff: BTreeMap<Value<T>, [T; 2]>,
}

impl<T: Scalar> Bimatrix<T> {
    pub fn new(
        moves1: FinSet<T>,
        moves2: FinSet<T>,
        payoff: BTreeMap<Value<T>, [T; 2]>,
    ) -> Result<Self> {
        for a in moves1.iter() {
            for b in moves2.iter() {
                let key = Value::pair(a.clone(), b.clone());
                let cell = payoff.get(&key).ok_or_else(|| Error::MissingEntry {
                    function: "payoff",
                    key: key.to_string(),
                })?;
                if cell.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParameter {
                        what: "payoff",
                        message: format!("payoff at `{key}` is not finite"),
                    });
                }
            }
        }
        Ok(Bimatrix {
            moves1,
            moves2,
            payoff,
        })
    }

    /// The canonical prisoner's dilemma with temptation 5, reward 3,
    /// punishment 1, sucker 0.
    pub fn prisoners_dilemma() -> Self {
        Self::symmetric_2x2(
            "C",
            "D",
            T::from_f64_lossy(5.0),
            T::from_f64_lossy(3.0),
            T::from_f64_lossy(1.0),
            T::from_f64_lossy(0.0),
        )
    }

    /// A symmetric 2x2 cooperation/defection game from the classic
    /// temptation/reward/punishment/sucker values.
    pub fn symmetric_2x2(
        cooperate: &str,
        defect: &str,
        temptation: T,
        reward: T,
        punishment: T,
        sucker: T,
    ) -> Self {
        let c = Value::sym(cooperate);
        let d = Value::sym(defect);
        let moves = FinSet::new([c.clone(), d.clone()]).expect("two distinct labels");
        let payoff = [
            (Value::pair(c.clone(), c.clone()), [reward, reward]),
            (Value::pair(c.clone(), d.clone()), [sucker, temptation]),
            (Value::pair(d.clone(), c.clone()), [temptation, sucker]),
            (Value::pair(d.clone(), d.clone()), [punishment, punishment]),
        ]
        .into_iter()
        .collect();
        Bimatrix {
            moves1: moves.clone(),
            moves2: moves,
            payoff,
        }
    }

    /// Matching pennies: zero-sum, no pure equilibrium.
    pub fn matching_pennies() -> Self {
        let h = Value::sym("H");
        let t = Value::sym("T");
        let moves = FinSet::new([h.clone(), t.clone()]).expect("two distinct labels");
        let one = T::one();
        let payoff = [
            (Value::pair(h.clone(), h.clone()), [one, -one]),
            (Value::pair(h.clone(), t.clone()), [-one, one]),
            (Value::pair(t.clone(), h.clone()), [-one, one]),
            (Value::pair(t.clone(), t.clone()), [one, -one]),
        ]
        .into_iter()
        .collect();
        Bimatrix {
            moves1: moves.clone(),
            moves2: moves,
            payoff,
        }
    }

    pub fn moves1(&self) -> &FinSet<T> {
        &self.moves1
    }

    pub fn moves2(&self) -> &FinSet<T> {
        &self.moves2
    }

    pub fn payoff(&self) -> &BTreeMap<Value<T>, [T; 2]> {
        &self.payoff
    }

    /// All move profiles, row player major.
    pub fn profiles(&self) -> FinSet<T> {
        self.moves1.product(&self.moves2)
    }

    /// The continuation induced by the game's own payoffs, for one-shot
    /// analysis.
    pub fn continuation(&self) -> Continuation<T> {
        Continuation::from_fn(&self.profiles(), |profile| {
            let cell = &self.payoff[profile];
            Value::num(vec![cell[0], cell[1]])
        })
    }

    /// Discounted utility over repeated play; both players observe the full
    /// move pair, so stage payoffs are keyed by profiles.
    pub fn utility(&self, discount: T) -> Result<UtilityFunctional<T>> {
        UtilityFunctional::discounted(self.stage_payoff(), discount)
    }

    pub fn utility_finite_horizon(&self, horizon: usize) -> Result<UtilityFunctional<T>> {
        UtilityFunctional::finite_horizon(self.stage_payoff(), horizon)
    }

    pub fn utility_mean_payoff(&self, window: usize) -> Result<UtilityFunctional<T>> {
        UtilityFunctional::mean_payoff(self.stage_payoff(), window)
    }

    fn stage_payoff(&self) -> BTreeMap<Value<T>, Vec<T>> {
        self.payoff
            .iter()
            .map(|(k, v)| (k.clone(), v.to_vec()))
            .collect()
    }

    /// The bimatrix as a coutility-free stage game: strategies and moves are
    /// both the move profiles, play is the identity, and a profile is an
    /// equilibrium for a continuation exactly when each player's move is an
    /// `epsilon`-best response in its own payoff coordinate. This is the
    /// parallel-composition equilibrium of two argmax decisions, whose fixed
    /// points are the pure Nash profiles.
    pub fn to_game(&self, epsilon: T) -> Result<CoutilityFreeGame<T>> {
        if self.moves1.is_empty() || self.moves2.is_empty() {
            return Err(Error::EmptyMoveSet);
        }
        let profiles = self.profiles();
        let play: BTreeMap<_, _> = profiles.iter().map(|p| (p.clone(), p.clone())).collect();

        let (m1, m2) = (self.moves1.clone(), self.moves2.clone());
        let equilibrium = {
            let (m1, m2) = (m1.clone(), m2.clone());
            Arc::new(move |_x: &Value<T>, k: &Continuation<T>, profile: &Value<T>| {
                let (a, b) = profile.expect_pair();
                let own1 = scalar_at(k, profile, 0);
                let own2 = scalar_at(k, profile, 1);
                m1.iter().all(|alt| {
                    own1 >= scalar_at(k, &Value::pair(alt.clone(), b.clone()), 0) - epsilon
                }) && m2.iter().all(|alt| {
                    own2 >= scalar_at(k, &Value::pair(a.clone(), alt.clone()), 1) - epsilon
                })
            })
        };
        let margin: MarginFn<T> = Arc::new(move |_x, k: &Continuation<T>, profile: &Value<T>| {
            let (a, b) = profile.expect_pair();
            let own1 = scalar_at(k, profile, 0);
            let own2 = scalar_at(k, profile, 1);
            let best1 = m1
                .iter()
                .filter(|alt| *alt != a)
                .map(|alt| scalar_at(k, &Value::pair(alt.clone(), b.clone()), 0))
                .fold(T::neg_infinity(), T::max);
            let best2 = m2
                .iter()
                .filter(|alt| *alt != b)
                .map(|alt| scalar_at(k, &Value::pair(a.clone(), alt.clone()), 1))
                .fold(T::neg_infinity(), T::max);
            (own1 - best1).min(own2 - best2)
        });

        let game = CoutilityFreeGame::from_parts(
            profiles.clone(),
            Carrier::numeric(2),
            profiles,
            play,
            equilibrium,
        )?;
        CoutilityFreeGame::try_new(
            game.into_game()
                .with_affine_invariance(true)
                .with_margin(margin)
                .with_builtin_equilibrium("nash", epsilon),
        )
    }

    /// Pure Nash profiles of the one-shot game, against its own payoffs.
    pub fn pure_equilibria(&self, epsilon: T) -> Result<Vec<Value<T>>> {
        self.to_game(epsilon)?.equilibrium_set(&self.continuation())
    }
}

/// Builds a bimatrix stage game; alias of [`Bimatrix::to_game`].
pub fn bimatrix_game<T: Scalar>(m: &Bimatrix<T>, epsilon: T) -> Result<CoutilityFreeGame<T>> {
    m.to_game(epsilon)
}

/// Constructors for named repeated-game strategies against a stage game.
pub struct StrategyBuilder<'a, T: Scalar> {
    stage: &'a CoutilityFreeGame<T>,
}

/// Entry point for the named-strategy constructors.
pub fn builtins<T: Scalar>(stage: &CoutilityFreeGame<T>) -> StrategyBuilder<'_, T> {
    StrategyBuilder { stage }
}

impl<'a, T: Scalar> StrategyBuilder<'a, T> {
    fn require_stage_strategy(&self, s: &Value<T>) -> Result<()> {
        if !self.stage.strategies().contains(s) {
            return Err(Error::UnknownMove {
                label: s.to_string(),
            });
        }
        Ok(())
    }

    fn require_move(&self, y: &Value<T>) -> Result<()> {
        if !self.stage.moves().contains(y) {
            return Err(Error::UnknownMove {
                label: y.to_string(),
            });
        }
        Ok(())
    }

    /// One state, always playing `stage_strategy`.
    pub fn all_constant(&self, stage_strategy: &Value<T>) -> Result<StrategyTransducer<T>> {
        self.require_stage_strategy(stage_strategy)?;
        let q = Value::sym("q0");
        StrategyTransducer::new(
            FinSet::new([q.clone()])?,
            q.clone(),
            [(q.clone(), stage_strategy.clone())].into_iter().collect(),
            [(
                q.clone(),
                self.stage
                    .moves()
                    .iter()
                    .map(|y| (y.clone(), q.clone()))
                    .collect(),
            )]
            .into_iter()
            .collect(),
            self.stage.moves().clone(),
            self.stage.strategies(),
        )
    }

    /// Two states: play `cooperate` until any move in `trigger` is observed,
    /// then play `punish` forever.
    pub fn grim_trigger(
        &self,
        cooperate: &Value<T>,
        punish: &Value<T>,
        trigger: &[Value<T>],
    ) -> Result<StrategyTransducer<T>> {
        self.require_stage_strategy(cooperate)?;
        self.require_stage_strategy(punish)?;
        for y in trigger {
            self.require_move(y)?;
        }
        let calm = Value::sym("calm");
        let punishing = Value::sym("punishing");
        let stage = [
            (calm.clone(), cooperate.clone()),
            (punishing.clone(), punish.clone()),
        ]
        .into_iter()
        .collect();
        let step = [
            (
                calm.clone(),
                self.stage
                    .moves()
                    .iter()
                    .map(|y| {
                        let next = if trigger.contains(y) {
                            punishing.clone()
                        } else {
                            calm.clone()
                        };
                        (y.clone(), next)
                    })
                    .collect(),
            ),
            (
                punishing.clone(),
                self.stage
                    .moves()
                    .iter()
                    .map(|y| (y.clone(), punishing.clone()))
                    .collect(),
            ),
        ]
        .into_iter()
        .collect();
        StrategyTransducer::new(
            FinSet::new([calm.clone(), punishing])?,
            calm,
            stage,
            step,
            self.stage.moves().clone(),
            self.stage.strategies(),
        )
    }

    /// Grim trigger for a cooperate/defect profile game: cooperate on
    /// `(C,C)`, punish with `(D,D)`, triggered by any observed defection.
    pub fn grim_trigger_pd(&self) -> Result<StrategyTransducer<T>> {
        let c = Value::sym("C");
        let d = Value::sym("D");
        let cc = Value::pair(c.clone(), c.clone());
        let dd = Value::pair(d.clone(), d.clone());
        let trigger: Vec<_> = self
            .stage
            .moves()
            .iter()
            .filter(|y| **y != cc)
            .cloned()
            .collect();
        self.grim_trigger(&cc, &dd, &trigger)
    }

    /// The tit-for-tat profile over a two-move alphabet `{c, d}`: both
    /// players echo the other's previous move, starting from mutual `c`.
    /// One state per distinguishable observation (move pair).
    pub fn tit_for_tat(&self, c: &Value<T>, d: &Value<T>) -> Result<StrategyTransducer<T>> {
        let mut states = Vec::new();
        let mut stage = BTreeMap::new();
        let mut step = BTreeMap::new();
        for a in [c, d] {
            for b in [c, d] {
                let observed = Value::pair(a.clone(), b.clone());
                self.require_move(&observed)?;
                // After observing (a, b), player 1 echoes b and player 2
                // echoes a.
                let next_profile = Value::pair(b.clone(), a.clone());
                self.require_stage_strategy(&next_profile)?;
                states.push(observed.clone());
                stage.insert(observed.clone(), next_profile);
                step.insert(
                    observed,
                    self.stage
                        .moves()
                        .iter()
                        .map(|y| (y.clone(), y.clone()))
                        .collect(),
                );
            }
        }
        StrategyTransducer::new(
            FinSet::new(states)?,
            Value::pair(c.clone(), c.clone()),
            stage,
            step,
            self.stage.moves().clone(),
            self.stage.strategies(),
        )
    }

    /// An explicit bounded-depth table, validated against the stage game.
    pub fn depth_table(
        &self,
        depth: usize,
        entries: BTreeMap<Vec<Value<T>>, Value<T>>,
        default: Value<T>,
    ) -> Result<DepthTable<T>> {
        self.require_stage_strategy(&default)?;
        for s in entries.values() {
            self.require_stage_strategy(s)?;
        }
        DepthTable::new(depth, entries, default, self.stage.moves().clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(ls: &[&str]) -> FinSet<f64> {
        FinSet::from_labels(ls.to_vec()).unwrap()
    }

    /// Independent pure-Nash enumerator used as the oracle everywhere.
    fn brute_force_nash(m: &Bimatrix<f64>, eps: f64) -> Vec<Value<f64>> {
        let mut out = Vec::new();
        for a in m.moves1().iter() {
            for b in m.moves2().iter() {
                let own = m.payoff()[&Value::pair(a.clone(), b.clone())];
                let beats_rows = m.moves1().iter().all(|alt| {
                    own[0] >= m.payoff()[&Value::pair(alt.clone(), b.clone())][0] - eps
                });
                let beats_cols = m.moves2().iter().all(|alt| {
                    own[1] >= m.payoff()[&Value::pair(a.clone(), alt.clone())][1] - eps
                });
                if beats_rows && beats_cols {
                    out.push(Value::pair(a.clone(), b.clone()));
                }
            }
        }
        out
    }

    #[test]
    fn argmax_examples() {
        let single = argmax_decision(&labels(&["only"]), Carrier::numeric(1), 1e-9).unwrap();
        let k = Continuation::from_fn(single.moves(), |_| Value::scalar(7.0));
        assert_eq!(
            single.equilibrium_set(&k).unwrap(),
            vec![Value::sym("only")]
        );

        let three = argmax_decision(&labels(&["a", "b", "c"]), Carrier::numeric(1), 1e-9).unwrap();
        let constant = Continuation::from_fn(three.moves(), |_| Value::scalar(1.0));
        assert_eq!(three.equilibrium_set(&constant).unwrap().len(), 3);

        let k = Continuation::new(
            three.moves(),
            [
                (Value::sym("a"), Value::scalar(1.0)),
                (Value::sym("b"), Value::scalar(3.0)),
                (Value::sym("c"), Value::scalar(2.0)),
            ],
        )
        .unwrap();
        assert_eq!(three.equilibrium_set(&k).unwrap(), vec![Value::sym("b")]);
        assert!(three.as_game().affine_invariant());
    }

    #[test]
    fn argmax_equilibrium_is_never_empty() {
        // A maximum exists on every finite move set.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = argmax_decision(&labels(&["a", "b", "c", "d"]), Carrier::numeric(1), 1e-9)
            .unwrap();
        for _ in 0..200 {
            let cells: BTreeMap<Value<f64>, Value<f64>> = g
                .moves()
                .iter()
                .map(|y| (y.clone(), Value::scalar(rng.gen_range(-10.0..10.0))))
                .collect();
            let k = Continuation::from_fn(g.moves(), |y| cells[y].clone());
            assert!(!g.equilibrium_set(&k).unwrap().is_empty());
        }
    }

    #[test]
    fn empty_move_set_rejected() {
        let err = argmax_decision(&FinSet::<f64>::empty(), Carrier::numeric(1), 1e-9)
            .unwrap_err();
        assert_eq!(err.kind(), "empty_move_set");
    }

    #[test]
    fn prisoners_dilemma_has_unique_defection_equilibrium() {
        let pd = Bimatrix::<f64>::prisoners_dilemma();
        let expected = brute_force_nash(&pd, 1e-9);
        let got = pd.pure_equilibria(1e-9).unwrap();
        assert_eq!(got, expected);
        assert_eq!(
            got,
            vec![Value::pair(Value::sym("D"), Value::sym("D"))]
        );
    }

    #[test]
    fn matching_pennies_has_no_pure_equilibrium() {
        let mp = Bimatrix::<f64>::matching_pennies();
        assert_eq!(brute_force_nash(&mp, 1e-9), Vec::<Value<f64>>::new());
        assert_eq!(mp.pure_equilibria(1e-9).unwrap(), Vec::<Value<f64>>::new());
    }

    #[test]
    fn dominant_profile_is_an_equilibrium() {
        // A profile strictly dominating in both coordinates for both players
        // is a best response for each.
        let moves = labels(&["x", "y"]);
        let mut payoff = BTreeMap::new();
        for a in moves.iter() {
            for b in moves.iter() {
                let bonus = if *a == Value::sym("x") { 5.0 } else { 0.0 };
                let bonus2 = if *b == Value::sym("x") { 5.0 } else { 0.0 };
                payoff.insert(Value::pair(a.clone(), b.clone()), [bonus, bonus2]);
            }
        }
        let m = Bimatrix::new(moves.clone(), moves, payoff).unwrap();
        let eq = m.pure_equilibria(1e-9).unwrap();
        assert!(eq.contains(&Value::pair(Value::sym("x"), Value::sym("x"))));
    }

    #[test]
    fn random_bimatrices_agree_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for trial in 0..500 {
            let n1 = rng.gen_range(1..=4);
            let n2 = rng.gen_range(1..=4);
            let moves1 = FinSet::from_labels((0..n1).map(|i| format!("r{i}"))).unwrap();
            let moves2 = FinSet::from_labels((0..n2).map(|i| format!("c{i}"))).unwrap();
            let mut payoff = BTreeMap::new();
            for a in moves1.iter() {
                for b in moves2.iter() {
                    payoff.insert(
                        Value::pair(a.clone(), b.clone()),
                        [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)],
                    );
                }
            }
            let m = Bimatrix::new(moves1, moves2, payoff).unwrap();
            assert_eq!(
                m.pure_equilibria(1e-9).unwrap(),
                brute_force_nash(&m, 1e-9),
                "trial {trial}"
            );
        }
    }

    #[test]
    fn affine_invariance_flag_is_sound() {
        // For flagged games, positive affine maps of the continuation leave
        // the equilibrium set extensionally unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let pd = Bimatrix::<f64>::prisoners_dilemma();
        let g = pd.to_game(1e-9).unwrap();
        for _ in 0..100 {
            let cells: BTreeMap<Value<f64>, Value<f64>> = g
                .moves()
                .iter()
                .map(|y| {
                    (
                        y.clone(),
                        Value::num([rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)]),
                    )
                })
                .collect();
            let k = Continuation::from_fn(g.moves(), |y| cells[y].clone());
            let a = rng.gen_range(0.1..3.0);
            let b = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let mapped = Continuation::from_fn(g.moves(), |y| {
                let v = k.get(y).as_num().unwrap();
                Value::num([a * v[0] + b[0], a * v[1] + b[1]])
            });
            assert_eq!(
                g.equilibrium_set(&k).unwrap(),
                g.equilibrium_set(&mapped).unwrap()
            );
        }
    }

    #[test]
    fn builtin_strategies() {
        let pd = Bimatrix::<f64>::prisoners_dilemma();
        let g = pd.to_game(1e-9).unwrap();
        let b = builtins(&g);
        let dd = Value::pair(Value::sym("D"), Value::sym("D"));

        let constant = b.all_constant(&dd).unwrap();
        assert_eq!(constant.states().len(), 1);

        let grim = b.grim_trigger_pd().unwrap();
        assert_eq!(grim.states().len(), 2);

        let tft = b.tit_for_tat(&Value::sym("C"), &Value::sym("D")).unwrap();
        // One state per distinguishable observation.
        assert_eq!(tft.states().len(), g.moves().len());

        let err = b.all_constant(&Value::sym("nope")).unwrap_err();
        assert_eq!(err.kind(), "unknown_move");
    }
}
