//! Finite coalgebras for the one-round-extension functor, their unfoldings
//! into the iterated game, and stream bisimulation.
//!
//! A finite coalgebra is a coutility-free game `h` together with maps
//! `now : Σ_h -> Σ_G`, `ltr : Σ_h x Y -> Σ_h` on strategies and
//! `hd : Y_h -> Y`, `tl : Y_h -> Y_h` on moves, jointly a morphism from `h`
//! into its one-round extension. Unfolding a strategy replays `now` along
//! `ltr`-walks (a history strategy); unfolding a move replays `hd` along
//! `tl`-orbits (a move stream). Because the carrier is finite, the strategy
//! unfolding is itself a finite-memory transducer, exactly.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::finset::FinSet;
use crate::game::Continuation;
use crate::scalar::Scalar;
use crate::stream::StreamPrefix;
use crate::two_cells::{CoutilityFreeGame, GameMorphism};
use crate::utility::{UtilityFunctional, UtilityKind};
use crate::value::Value;

use super::strategy::{DepthTable, IterStrategy, StrategyTransducer};
use super::IteratedGame;

/// Equilibrium predicate attached to a machine-derived coalgebra.
#[derive(Debug, Clone)]
pub enum CoalgebraEquilibrium<T: Scalar> {
    /// The empty predicate. Always a valid coalgebra equilibrium.
    Empty,
    /// Holds at a carrier element exactly when the machine restarted there is
    /// an exact subgame-perfect equilibrium for `utility`, and the queried
    /// continuation is a positive affine image of the self-play value table
    /// `utility` induces (within `epsilon` plus the evaluation tail). The
    /// affine closure matters: walking the equilibrium operator shifts the
    /// continuation by consumed payoffs and rescales it by the discount, and
    /// those shifted tables must still be recognized. Sound by construction:
    /// members unfold to true greatest-fixpoint equilibria.
    ExactSubgamePerfect {
        utility: UtilityFunctional<T>,
        epsilon: T,
    },
}

/// A finite coalgebra for the one-round extension of a fixed stage game.
#[derive(Debug, Clone)]
pub struct FiniteCoalgebra<T: Scalar> {
    h: CoutilityFreeGame<T>,
    stage_moves: FinSet<T>,
    stage_strategies: FinSet<T>,
    now: BTreeMap<Value<T>, Value<T>>,
    ltr: BTreeMap<Value<T>, BTreeMap<Value<T>, Value<T>>>,
    hd: BTreeMap<Value<T>, Value<T>>,
    tl: BTreeMap<Value<T>, Value<T>>,
}

impl<T: Scalar> FiniteCoalgebra<T> {
    /// Validates totality of all four maps and the play square: for every
    /// strategy of `h`, the head of its play is the stage play of its `now`,
    /// and the tail of its play is the play of its `ltr` along that move.
    /// The equilibrium transport condition cannot be exhausted over numeric
    /// utilities; validate it with `check_morphism_sampled` against
    /// [`FiniteCoalgebra::coalgebra_morphism`].
    pub fn new(
        stage: &CoutilityFreeGame<T>,
        h: CoutilityFreeGame<T>,
        now: BTreeMap<Value<T>, Value<T>>,
        ltr: BTreeMap<Value<T>, BTreeMap<Value<T>, Value<T>>>,
        hd: BTreeMap<Value<T>, Value<T>>,
        tl: BTreeMap<Value<T>, Value<T>>,
    ) -> Result<Self> {
        for sigma in h.strategies().iter() {
            let s = now.get(sigma).ok_or_else(|| Error::MissingEntry {
                function: "now",
                key: sigma.to_string(),
            })?;
            if !stage.strategies().contains(s) {
                return Err(Error::UnknownMove {
                    label: s.to_string(),
                });
            }
            let row = ltr.get(sigma).ok_or_else(|| Error::MissingEntry {
                function: "ltr",
                key: sigma.to_string(),
            })?;
            for y in stage.moves().iter() {
                let next = row.get(y).ok_or_else(|| Error::MissingEntry {
                    function: "ltr",
                    key: format!("{sigma}, {y}"),
                })?;
                if !h.strategies().contains(next) {
                    return Err(Error::InvalidMorphism {
                        reason: format!("ltr({sigma}, {y}) leaves the strategy carrier"),
                    });
                }
            }
        }
        for z in h.moves().iter() {
            let head = hd.get(z).ok_or_else(|| Error::MissingEntry {
                function: "hd",
                key: z.to_string(),
            })?;
            if !stage.moves().contains(head) {
                return Err(Error::UnknownMove {
                    label: head.to_string(),
                });
            }
            let tail = tl.get(z).ok_or_else(|| Error::MissingEntry {
                function: "tl",
                key: z.to_string(),
            })?;
            if !h.moves().contains(tail) {
                return Err(Error::InvalidMorphism {
                    reason: format!("tl({z}) leaves the move carrier"),
                });
            }
        }

        // Play square: the coalgebra map must commute with plays.
        for sigma in h.strategies().iter() {
            let played = h.play_of(sigma);
            let head = &hd[&played];
            let stage_play = stage.play_of(&now[sigma]);
            if *head != stage_play {
                return Err(Error::InvalidMorphism {
                    reason: format!(
                        "play square fails at `{sigma}`: hd(play) = {head}, stage play = {stage_play}"
                    ),
                });
            }
            let tail = &tl[&played];
            let continued = h.play_of(&ltr[sigma][&stage_play]);
            if *tail != continued {
                return Err(Error::InvalidMorphism {
                    reason: format!(
                        "play square fails at `{sigma}`: tl(play) = {tail}, play of ltr = {continued}"
                    ),
                });
            }
        }

        Ok(FiniteCoalgebra {
            h,
            stage_moves: stage.moves().clone(),
            stage_strategies: stage.strategies().clone(),
            now,
            ltr,
            hd,
            tl,
        })
    }

    /// The self-play coalgebra of a finite-memory strategy: both carriers are
    /// the machine's states, `now`/`ltr` are its stage/step maps, a state
    /// plays itself, and `hd`/`tl` follow self-play. The equilibrium of the
    /// carrier game is chosen by the caller.
    pub fn from_transducer(
        stage: &CoutilityFreeGame<T>,
        machine: &StrategyTransducer<T>,
        equilibrium: CoalgebraEquilibrium<T>,
    ) -> Result<Self> {
        let iterated = IteratedGame::new(stage.clone())?;
        iterated.validate_strategy(&IterStrategy::Machine(machine.clone()))?;

        let states = machine.states().clone();
        let play: BTreeMap<_, _> = states.iter().map(|q| (q.clone(), q.clone())).collect();

        let equilibrium_fn: crate::game::EquilibriumFn<T> = match &equilibrium {
            CoalgebraEquilibrium::Empty => Arc::new(|_, _, _| false),
            CoalgebraEquilibrium::ExactSubgamePerfect { utility, epsilon } => {
                // Precompute, per state: whether the machine restarted there
                // is exactly subgame-perfect, and the self-play value table
                // whose positive affine class the queried continuation must
                // belong to.
                let eps = *epsilon;
                let mut holds_at = BTreeSet::new();
                let mut reference: BTreeMap<Value<T>, Vec<T>> = BTreeMap::new();
                let mut slack = eps;
                let horizon = utility
                    .prefix_length_for(eps, super::DEFAULT_HORIZON_CAP)
                    .unwrap_or(super::DEFAULT_HORIZON_CAP);
                for q in states.iter() {
                    let rerooted = machine_rooted_at(machine, q)?;
                    let verdict = iterated.check_exact(&rerooted, utility, eps)?;
                    if verdict.holds() {
                        holds_at.insert(q.clone());
                    }
                    let mut stream = StreamPrefix::empty();
                    let mut cursor = q.clone();
                    for _ in 0..horizon {
                        let y = stage.play_of(machine.stage_of(&cursor));
                        cursor = machine.step_of(&cursor, &y)?.clone();
                        stream.push(y);
                    }
                    let eval = utility.evaluate_prefix(&stream)?;
                    if eval.tail_bound.is_finite() {
                        slack = slack.max(eps + eval.tail_bound);
                    }
                    reference.insert(q.clone(), eval.value);
                }
                let states = states.clone();
                Arc::new(move |_x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
                    holds_at.contains(sigma)
                        && affine_image_of(k, &states, &reference, slack)
                })
            }
        };

        let h = CoutilityFreeGame::from_parts(
            states.clone(),
            stage.utility_carrier().clone(),
            states.clone(),
            play,
            equilibrium_fn,
        )?;

        let now: BTreeMap<_, _> = states
            .iter()
            .map(|q| (q.clone(), machine.stage_of(q).clone()))
            .collect();
        let mut ltr = BTreeMap::new();
        let mut hd = BTreeMap::new();
        let mut tl = BTreeMap::new();
        for q in states.iter() {
            let mut row = BTreeMap::new();
            for y in stage.moves().iter() {
                row.insert(y.clone(), machine.step_of(q, y)?.clone());
            }
            ltr.insert(q.clone(), row);
            let played = stage.play_of(machine.stage_of(q));
            tl.insert(q.clone(), machine.step_of(q, &played)?.clone());
            hd.insert(q.clone(), played);
        }

        FiniteCoalgebra::new(stage, h, now, ltr, hd, tl)
    }

    pub fn game(&self) -> &CoutilityFreeGame<T> {
        &self.h
    }

    pub fn carrier_strategies(&self) -> &FinSet<T> {
        self.h.strategies()
    }

    pub fn carrier_moves(&self) -> &FinSet<T> {
        self.h.moves()
    }

    pub fn stage_moves(&self) -> &FinSet<T> {
        &self.stage_moves
    }

    pub fn now_of(&self, sigma: &Value<T>) -> &Value<T> {
        &self.now[sigma]
    }

    pub fn ltr_of(&self, sigma: &Value<T>, y: &Value<T>) -> Result<&Value<T>> {
        self.ltr
            .get(sigma)
            .and_then(|row| row.get(y))
            .ok_or_else(|| Error::UnknownMove {
                label: y.to_string(),
            })
    }

    pub fn hd_of(&self, z: &Value<T>) -> &Value<T> {
        &self.hd[z]
    }

    pub fn tl_of(&self, z: &Value<T>) -> &Value<T> {
        &self.tl[z]
    }

    /// The coalgebra structure as an explicit pair of maps into the
    /// one-round extension: strategies go to `(now, ltr-row)` pairs, moves to
    /// `(hd, tl)` pairs. Feed to `check_morphism_sampled` together with
    /// `step_game(stage, h)` to validate the equilibrium condition.
    pub fn coalgebra_morphism(&self) -> GameMorphism<T> {
        let alpha_strategies = self
            .h
            .strategies()
            .iter()
            .map(|sigma| {
                let row = Value::table(
                    self.ltr[sigma]
                        .iter()
                        .map(|(y, next)| (y.clone(), next.clone())),
                )
                .expect("moves are distinct");
                (
                    sigma.clone(),
                    Value::pair(self.now[sigma].clone(), row),
                )
            })
            .collect();
        let alpha_moves = self
            .h
            .moves()
            .iter()
            .map(|z| {
                (
                    z.clone(),
                    Value::pair(self.hd[z].clone(), self.tl[z].clone()),
                )
            })
            .collect();
        GameMorphism::new(alpha_moves, alpha_strategies)
    }

    /// Exact unfolding of a carrier strategy: the transducer whose states are
    /// the carrier, rooted at `sigma`, with `now` as stage map and `ltr` as
    /// step map.
    pub fn unfold_machine(&self, sigma: &Value<T>) -> Result<StrategyTransducer<T>> {
        if !self.h.strategies().contains(sigma) {
            return Err(Error::UnknownMove {
                label: sigma.to_string(),
            });
        }
        StrategyTransducer::new(
            self.h.strategies().clone(),
            sigma.clone(),
            self.now.clone(),
            self.ltr.clone(),
            self.stage_moves.clone(),
            &self.stage_strategies,
        )
    }

    /// Bounded-depth unfolding of a carrier strategy: the table answering
    /// `now(ltr*(sigma, w))` on every history shorter than `depth` (and the
    /// root's stage strategy beyond).
    pub fn unfold_table(&self, sigma: &Value<T>, depth: usize) -> Result<DepthTable<T>> {
        self.unfold_machine(sigma)?.to_depth_table(depth)
    }

    /// Length-`depth` prefix of the move stream unfolding a carrier move:
    /// `hd(z), hd(tl(z)), hd(tl(tl(z))), ...`.
    pub fn unfold_stream(&self, z: &Value<T>, depth: usize) -> Result<StreamPrefix<T>> {
        if !self.h.moves().contains(z) {
            return Err(Error::UnknownMove {
                label: z.to_string(),
            });
        }
        let mut out = StreamPrefix::empty();
        let mut cursor = z.clone();
        for _ in 0..depth {
            out.push(self.hd[&cursor].clone());
            cursor = self.tl[&cursor].clone();
        }
        Ok(out)
    }

    /// Infinite stream unfolding of a carrier move.
    pub fn stream_iter(&self, z: &Value<T>) -> CoalgebraStream<T> {
        CoalgebraStream {
            hd: self.hd.clone(),
            tl: self.tl.clone(),
            cursor: z.clone(),
        }
    }

    /// Unfolds every carrier strategy and move to the given depth.
    pub fn unfold(
        &self,
        depth: usize,
    ) -> Result<(
        BTreeMap<Value<T>, DepthTable<T>>,
        BTreeMap<Value<T>, StreamPrefix<T>>,
    )> {
        let mut tables = BTreeMap::new();
        for sigma in self.h.strategies().iter() {
            tables.insert(sigma.clone(), self.unfold_table(sigma, depth)?);
        }
        let mut streams = BTreeMap::new();
        for z in self.h.moves().iter() {
            streams.insert(z.clone(), self.unfold_stream(z, depth)?);
        }
        Ok((tables, streams))
    }

    /// Membership in the unfolded equilibrium predicate: `strategy` belongs
    /// iff some carrier strategy unfolds to it (behaviorally, to `depth`) and
    /// is an equilibrium of `h` for the continuation obtained by evaluating
    /// `utility` along the move-stream unfoldings.
    pub fn membership_via_unfolding(
        &self,
        strategy: &IterStrategy<T>,
        utility: &UtilityFunctional<T>,
        depth: usize,
        epsilon: T,
    ) -> Result<bool> {
        utility.validate_moves(&self.stage_moves)?;
        let horizon = utility
            .prefix_length_for(epsilon, super::DEFAULT_HORIZON_CAP)
            .unwrap_or_else(|| match utility.kind() {
                UtilityKind::Discounted => super::DEFAULT_HORIZON_CAP,
                _ => utility.horizon(),
            });
        let transported = Continuation::new(
            self.h.moves(),
            self.h
                .moves()
                .iter()
                .map(|z| {
                    let stream = self.unfold_stream(z, horizon.max(1))?;
                    let eval = utility.evaluate_prefix(&stream)?;
                    Ok((z.clone(), Value::num(eval.value)))
                })
                .collect::<Result<Vec<_>>>()?,
        )?;

        for sigma in self.h.strategies().iter() {
            let unfolded = IterStrategy::Machine(self.unfold_machine(sigma)?);
            if !strategies_equal_to_depth(&unfolded, strategy, depth)? {
                continue;
            }
            if self.h.is_equilibrium(&transported, sigma) {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Whether the continuation values are `offset + scale * reference` for some
/// componentwise offset and a single positive scale, within `tolerance`.
fn affine_image_of<T: Scalar>(
    k: &Continuation<T>,
    carrier: &FinSet<T>,
    reference: &BTreeMap<Value<T>, Vec<T>>,
    tolerance: T,
) -> bool {
    let Some(z0) = carrier.first() else {
        return true;
    };
    let Some(m0) = k.get(z0).as_num() else {
        return false;
    };
    let ref0 = &reference[z0];
    if m0.len() != ref0.len() {
        return false;
    }
    // The best-spread coordinate pins the scale; a flat reference only
    // matches flat continuations.
    let mut spread = T::zero();
    let mut pin: Option<(Value<T>, usize)> = None;
    for z in carrier.iter() {
        let r = &reference[z];
        for (i, (a, b)) in r.iter().zip(ref0.iter()).enumerate() {
            let gap = (*a - *b).abs();
            if gap > spread {
                spread = gap;
                pin = Some((z.clone(), i));
            }
        }
    }
    let scale = match &pin {
        None => T::one(),
        Some((z1, i)) => {
            let Some(m1) = k.get(z1).as_num() else {
                return false;
            };
            let s = (m1[*i] - m0[*i]) / (reference[z1][*i] - ref0[*i]);
            if !(s > T::zero()) || !s.is_finite() {
                return false;
            }
            s
        }
    };
    let tol = tolerance * (T::one() + scale);
    let offset: Vec<T> = m0
        .iter()
        .zip(ref0.iter())
        .map(|(m, r)| *m - scale * *r)
        .collect();
    carrier.iter().all(|z| match k.get(z).as_num() {
        None => false,
        Some(m) => {
            m.len() == offset.len()
                && m.iter()
                    .zip(reference[z].iter().zip(offset.iter()))
                    .all(|(mv, (rv, ov))| (*mv - (*ov + scale * *rv)).abs() <= tol)
        }
    })
}

fn machine_rooted_at<T: Scalar>(
    machine: &StrategyTransducer<T>,
    state: &Value<T>,
) -> Result<StrategyTransducer<T>> {
    let mut stage = BTreeMap::new();
    let mut step = BTreeMap::new();
    for q in machine.states().iter() {
        stage.insert(q.clone(), machine.stage_of(q).clone());
        let mut row = BTreeMap::new();
        for y in machine.moves().iter() {
            row.insert(y.clone(), machine.step_of(q, y)?.clone());
        }
        step.insert(q.clone(), row);
    }
    // Stage values were validated at the original machine's construction; the
    // declared universe is recovered from them.
    let universe = FinSet::new(
        stage
            .values()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter(),
    )?;
    StrategyTransducer::new(
        machine.states().clone(),
        state.clone(),
        stage,
        step,
        machine.moves().clone(),
        &universe,
    )
}

/// Behavioral equality of two history strategies on every history shorter
/// than `depth`, by breadth-first search over pairs with memoized suffixes.
pub fn strategies_equal_to_depth<T: Scalar>(
    a: &IterStrategy<T>,
    b: &IterStrategy<T>,
    depth: usize,
) -> Result<bool> {
    if a.moves() != b.moves() {
        return Ok(false);
    }
    let mut visited: BTreeSet<(Value<T>, Value<T>)> = BTreeSet::new();
    let mut queue: VecDeque<(IterStrategy<T>, IterStrategy<T>, usize)> =
        VecDeque::from([(a.clone(), b.clone(), 0usize)]);
    while let Some((a, b, level)) = queue.pop_front() {
        if level >= depth {
            continue;
        }
        if !visited.insert((a.memo_key(), b.memo_key())) {
            continue;
        }
        if a.now() != b.now() {
            return Ok(false);
        }
        if level + 1 < depth {
            for y in a.moves().clone().iter() {
                queue.push_back((a.reroot(y)?, b.reroot(y)?, level + 1));
            }
        }
    }
    Ok(true)
}

/// Infinite hd/tl stream over a coalgebra carrier.
pub struct CoalgebraStream<T: Scalar> {
    hd: BTreeMap<Value<T>, Value<T>>,
    tl: BTreeMap<Value<T>, Value<T>>,
    cursor: Value<T>,
}

impl<T: Scalar> Iterator for CoalgebraStream<T> {
    type Item = Value<T>;

    fn next(&mut self) -> Option<Self::Item> {
        let head = self.hd[&self.cursor].clone();
        self.cursor = self.tl[&self.cursor].clone();
        Some(head)
    }
}

/// Result of comparing two streams to a depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BisimOutcome {
    EqualToDepth(usize),
    DisagreeAt { index: usize },
}

/// Compares the first `depth` moves of two stream generators. A generator
/// running dry counts as a disagreement at that index unless both end there.
pub fn bisim_check<T: Scalar>(
    a: impl IntoIterator<Item = Value<T>>,
    b: impl IntoIterator<Item = Value<T>>,
    depth: usize,
) -> BisimOutcome {
    let mut a = a.into_iter();
    let mut b = b.into_iter();
    for index in 0..depth {
        match (a.next(), b.next()) {
            (None, None) => return BisimOutcome::EqualToDepth(index),
            (Some(x), Some(y)) if x == y => {}
            _ => return BisimOutcome::DisagreeAt { index },
        }
    }
    BisimOutcome::EqualToDepth(depth)
}
