//! Infinite iteration of a coutility-free stage game.
//!
//! Strategies of the iterated game map move histories to stage strategies;
//! plays are move streams produced corecursively by feeding each played move
//! back into the history. The equilibrium predicate is the greatest fixpoint
//! of the operator that demands the current stage strategy be optimal for the
//! induced stage continuation and, for every possible next move, the rest of
//! the strategy be recursively in the predicate. Off-path moves matter, which
//! is what makes the verdict subgame-perfect.
//!
//! Membership is computed two ways:
//! - [`IteratedGame::check_bounded`] unrolls the operator `d` times from the
//!   full predicate. Failure anywhere refutes membership outright (the
//!   greatest fixpoint sits below every approximant); success only certifies
//!   membership in the depth-`d` approximant.
//! - [`IteratedGame::check_exact`] decides membership for finite-memory
//!   strategies under discounted utilities by the one-shot deviation
//!   principle: exact self-play values are computed in closed form from the
//!   eventually-periodic self-play orbit, and every machine state (on-path or
//!   not) must play a stage-optimal strategy against them. Requires the stage
//!   equilibrium to be invariant under positive affine maps of the
//!   continuation, so history-accumulated offsets and scales can be dropped.

pub mod coalgebra;
pub mod strategy;
pub mod verdict;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::finset::FinSet;
use crate::game::Continuation;
use crate::scalar::Scalar;
use crate::stream::StreamPrefix;
use crate::two_cells::CoutilityFreeGame;
use crate::utility::{UtilityFunctional, UtilityKind};
use crate::value::Value;

pub use coalgebra::{bisim_check, BisimOutcome, CoalgebraEquilibrium, FiniteCoalgebra};
pub use strategy::{DepthTable, IterStrategy, StrategyTransducer};
pub use verdict::{DepthChecked, Verdict, VerdictStatus, Warning, Witness};

/// Default cap on prefix lengths used to drive utility tail bounds below the
/// tolerance.
pub const DEFAULT_HORIZON_CAP: usize = 100_000;

/// Cap on the number of history nodes the non-memoized bounded check visits.
pub const BOUNDED_NODE_GUARD: usize = 1_000_000;

/// Handle bundling a stage game with the operations of its infinite
/// iteration.
#[derive(Debug, Clone)]
pub struct IteratedGame<T: Scalar> {
    stage: CoutilityFreeGame<T>,
    horizon_cap: usize,
}

/// Builds the iterated-game handle for a stage game.
pub fn iterate_game<T: Scalar>(stage: CoutilityFreeGame<T>) -> Result<IteratedGame<T>> {
    IteratedGame::new(stage)
}

impl<T: Scalar> IteratedGame<T> {
    pub fn new(stage: CoutilityFreeGame<T>) -> Result<Self> {
        if stage.moves().is_empty() {
            return Err(Error::EmptyMoveSet);
        }
        if stage.strategies().is_empty() {
            return Err(Error::EmptyStrategySet);
        }
        Ok(IteratedGame {
            stage,
            horizon_cap: DEFAULT_HORIZON_CAP,
        })
    }

    pub fn with_horizon_cap(mut self, cap: usize) -> Self {
        self.horizon_cap = cap;
        self
    }

    pub fn stage(&self) -> &CoutilityFreeGame<T> {
        &self.stage
    }

    pub fn moves(&self) -> &FinSet<T> {
        self.stage.moves()
    }

    /// Checks a strategy is compatible with this stage game: same move set,
    /// stage strategies drawn from the stage strategy set.
    pub fn validate_strategy(&self, strategy: &IterStrategy<T>) -> Result<()> {
        if strategy.moves() != self.stage.moves() {
            return Err(Error::InvalidParameter {
                what: "strategy",
                message: format!(
                    "strategy move set {} differs from the stage move set {}",
                    strategy.moves(),
                    self.stage.moves()
                ),
            });
        }
        match strategy {
            IterStrategy::Machine(m) => {
                for q in m.states().iter() {
                    let s = m.stage_of(q);
                    if !self.stage.strategies().contains(s) {
                        return Err(Error::UnknownMove {
                            label: s.to_string(),
                        });
                    }
                }
            }
            IterStrategy::Table(t) => {
                for (_, s) in t.entries() {
                    if !self.stage.strategies().contains(s) {
                        return Err(Error::UnknownMove {
                            label: s.to_string(),
                        });
                    }
                }
                if !self.stage.strategies().contains(t.default_stage()) {
                    return Err(Error::UnknownMove {
                        label: t.default_stage().to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// First component of the coalgebra structure on strategies: the stage
    /// strategy played at the empty history.
    pub fn now(&self, strategy: &IterStrategy<T>) -> Value<T> {
        strategy.now().clone()
    }

    /// Second component: the strategy after observing `y`.
    pub fn later(&self, strategy: &IterStrategy<T>, y: &Value<T>) -> Result<IterStrategy<T>> {
        strategy.reroot(y)
    }

    /// Unrolls self-play for `depth` rounds: each round plays the stage
    /// strategy at the current history and feeds the played move back.
    pub fn play_stream(&self, strategy: &IterStrategy<T>, depth: usize) -> Result<StreamPrefix<T>> {
        self.validate_strategy(strategy)?;
        let mut current = strategy.clone();
        let mut out = StreamPrefix::empty();
        for _ in 0..depth {
            let y = self.stage.play_of(current.now());
            current = current.reroot(&y)?;
            out.push(y);
        }
        Ok(out)
    }

    /// Infinite self-play move stream.
    pub fn self_play_iter(&self, strategy: &IterStrategy<T>) -> Result<SelfPlayIter<T>> {
        self.validate_strategy(strategy)?;
        Ok(SelfPlayIter {
            game: self.stage.clone(),
            current: strategy.clone(),
        })
    }

    /// Exact discounted self-play values from every machine state, with no
    /// affine part: the self-play orbit of each state is eventually periodic,
    /// so the value is a finite sum plus a geometric series in closed form.
    /// Cycle detection is Floyd's tortoise-and-hare on the orbit.
    pub fn self_play_values(
        &self,
        machine: &StrategyTransducer<T>,
        utility: &UtilityFunctional<T>,
    ) -> Result<BTreeMap<Value<T>, Vec<T>>> {
        self.validate_strategy(&IterStrategy::Machine(machine.clone()))?;
        utility.validate_moves(self.stage.moves())?;
        let delta = utility.discount();
        let players = utility.players();

        let succ = |q: &Value<T>| -> Value<T> {
            let y = self.stage.play_of(machine.stage_of(q));
            machine
                .step_of(q, &y)
                .expect("played move is in the move set")
                .clone()
        };
        let payoff_at = |q: &Value<T>| -> Result<Vec<T>> {
            let y = self.stage.play_of(machine.stage_of(q));
            utility.payoff_of(&y).cloned()
        };

        let mut values = BTreeMap::new();
        for q0 in machine.states().iter() {
            // Floyd's cycle detection on the deterministic orbit.
            let mut tortoise = succ(q0);
            let mut hare = succ(&succ(q0));
            while tortoise != hare {
                tortoise = succ(&tortoise);
                hare = succ(&succ(&hare));
            }
            let mut mu = 0usize;
            let mut probe = q0.clone();
            while probe != hare {
                probe = succ(&probe);
                hare = succ(&hare);
                mu += 1;
            }
            let mut lambda = 1usize;
            let mut walker = succ(&probe);
            while walker != probe {
                walker = succ(&walker);
                lambda += 1;
            }

            // Tail sum over the approach, then the cycle in closed form.
            let mut value = vec![T::zero(); players];
            let mut factor = T::one();
            let mut state = q0.clone();
            for _ in 0..mu {
                let u = payoff_at(&state)?;
                for (v, c) in value.iter_mut().zip(u.iter()) {
                    *v = *v + factor * *c;
                }
                factor = factor * delta;
                state = succ(&state);
            }
            let mut cycle_sum = vec![T::zero(); players];
            let mut cycle_factor = T::one();
            let mut cursor = state.clone();
            for _ in 0..lambda {
                let u = payoff_at(&cursor)?;
                for (v, c) in cycle_sum.iter_mut().zip(u.iter()) {
                    *v = *v + cycle_factor * *c;
                }
                cycle_factor = cycle_factor * delta;
                cursor = succ(&cursor);
            }
            let denom = T::one() - delta.powi(lambda as i32);
            for (v, c) in value.iter_mut().zip(cycle_sum.iter()) {
                *v = *v + factor * *c / denom;
            }
            values.insert(q0.clone(), value);
        }
        Ok(values)
    }

    /// Depth-bounded membership check.
    ///
    /// Decides membership in the `depth`-th approximant of the equilibrium
    /// operator: the stage optimality condition is tested at every history
    /// shorter than `depth`, branching over all moves, not just played ones.
    /// `Fails` is a definitive non-membership proof with the shortest (then
    /// lexicographically first) violating history as witness; `Holds` only
    /// certifies the approximant.
    pub fn check_bounded(
        &self,
        strategy: &IterStrategy<T>,
        utility: &UtilityFunctional<T>,
        depth: usize,
        epsilon: T,
    ) -> Result<Verdict<T>> {
        if depth == 0 {
            return Err(Error::InvalidParameter {
                what: "depth",
                message: "bounded check requires depth >= 1".into(),
            });
        }
        self.validate_check_inputs(strategy, utility, epsilon)?;

        let fast = matches!(strategy, IterStrategy::Machine(_))
            && self.stage.as_game().affine_invariant()
            && utility.kind() == UtilityKind::Discounted;
        if fast {
            let IterStrategy::Machine(machine) = strategy else {
                unreachable!()
            };
            self.check_states(machine, utility, epsilon, Some(depth))
        } else {
            self.check_bounded_literal(strategy, utility, depth, epsilon)
        }
    }

    /// Exact membership decision for finite-memory strategies under
    /// discounted utilities, by the one-shot deviation principle.
    ///
    /// `Holds` means true greatest-fixpoint membership (up to `epsilon` in
    /// value comparisons); `Fails` carries the shortest input word reaching a
    /// machine state whose stage strategy is not optimal against the exact
    /// continuation values.
    pub fn check_exact(
        &self,
        machine: &StrategyTransducer<T>,
        utility: &UtilityFunctional<T>,
        epsilon: T,
    ) -> Result<Verdict<T>> {
        if utility.kind() != UtilityKind::Discounted {
            return Err(Error::ExactRequiresDiscounted);
        }
        if !self.stage.as_game().affine_invariant() {
            return Err(Error::NotAffineInvariant);
        }
        let strategy = IterStrategy::Machine(machine.clone());
        self.validate_check_inputs(&strategy, utility, epsilon)?;
        self.check_states(machine, utility, epsilon, None)
    }

    fn validate_check_inputs(
        &self,
        strategy: &IterStrategy<T>,
        utility: &UtilityFunctional<T>,
        epsilon: T,
    ) -> Result<()> {
        if !(epsilon > T::zero()) {
            return Err(Error::InvalidParameter {
                what: "epsilon",
                message: "tolerance must be positive".into(),
            });
        }
        self.validate_strategy(strategy)?;
        utility.validate_moves(self.stage.moves())
    }

    /// Shared state-based search behind the exact check and the memoized
    /// bounded check. `depth_limit = None` exhausts all states.
    ///
    /// By affine invariance, the verdict of the stage optimality test at a
    /// history depends only on the machine state there (continuations at two
    /// histories with the same state differ by a positive affine map), except
    /// that once the accumulated scale is zero (a zero discount, or a
    /// pre-shifted constant functional) the continuation is constant. States
    /// are therefore tested against the exact scaleless deviation table, or
    /// against the constant table where the scale has collapsed.
    fn check_states(
        &self,
        machine: &StrategyTransducer<T>,
        utility: &UtilityFunctional<T>,
        epsilon: T,
        depth_limit: Option<usize>,
    ) -> Result<Verdict<T>> {
        let delta = utility.discount();
        let values = self.self_play_values(machine, utility)?;
        let players = utility.players();

        let deviation_table = |q: &Value<T>| -> Continuation<T> {
            Continuation::from_fn(self.stage.moves(), |y| {
                let u = utility.payoff_of(y).expect("validated total");
                let next = machine.step_of(q, y).expect("validated total");
                let tail = &values[next];
                Value::num(
                    u.iter()
                        .zip(tail.iter())
                        .map(|(a, b)| *a + delta * *b)
                        .collect::<Vec<_>>(),
                )
            })
        };
        let constant_table = Continuation::from_fn(self.stage.moves(), |_| {
            Value::num(vec![T::zero(); players])
        });

        let root_is_constant = !(utility.scale() > T::zero());
        let deep_is_constant = root_is_constant || delta == T::zero();

        let mut warnings = Vec::new();
        let mut worst_margin: Option<T> = None;
        let mut check = |q: &Value<T>, constant: bool| -> (bool, Continuation<T>) {
            let table = if constant {
                constant_table.clone()
            } else {
                deviation_table(q)
            };
            let sigma = machine.stage_of(q);
            let ok = self
                .stage
                .as_game()
                .is_equilibrium(&Value::Unit, &table, sigma);
            if let Some(margin) = self.stage.as_game().margin(&Value::Unit, &table, sigma) {
                // Within epsilon of equality: the verdict rests on the tie
                // rule, so flag it.
                if margin.abs() <= epsilon {
                    let closer = match worst_margin {
                        None => true,
                        Some(m) => margin.abs() < m.abs(),
                    };
                    if closer {
                        worst_margin = Some(margin);
                    }
                }
            }
            (ok, table)
        };

        let depth_of = |status: &Option<usize>| match status {
            Some(d) => DepthChecked::Bounded(*d),
            None => DepthChecked::Exhaustive,
        };
        let depth_limit_opt = depth_limit;

        let fail = |history: Vec<Value<T>>, table: &Continuation<T>| -> Witness<T> {
            let deviation = self
                .stage
                .strategies()
                .iter()
                .find(|alt| self.stage.as_game().is_equilibrium(&Value::Unit, table, alt))
                .cloned();
            Witness {
                history: StreamPrefix::new(history),
                deviation,
            }
        };

        // Root node.
        let (root_ok, root_table) = check(machine.initial(), root_is_constant);
        let mut witness = if root_ok {
            None
        } else {
            Some(fail(Vec::new(), &root_table))
        };

        // Deeper nodes: breadth-first over machine states in move order, so
        // the first failing visit is the shortest-then-lexicographic witness.
        if witness.is_none() {
            let mut visited: BTreeSet<Value<T>> = BTreeSet::new();
            let mut queue: VecDeque<(Value<T>, Vec<Value<T>>)> = VecDeque::new();
            for y in self.stage.moves().iter() {
                let next = machine.step_of(machine.initial(), y)?.clone();
                if visited.insert(next.clone()) {
                    queue.push_back((next, vec![y.clone()]));
                }
            }
            while let Some((q, history)) = queue.pop_front() {
                if let Some(d) = depth_limit_opt {
                    if history.len() >= d {
                        continue;
                    }
                }
                let (ok, table) = check(&q, deep_is_constant);
                if !ok {
                    witness = Some(fail(history, &table));
                    break;
                }
                let can_descend = match depth_limit_opt {
                    Some(d) => history.len() + 1 < d,
                    None => true,
                };
                if can_descend {
                    for y in self.stage.moves().iter() {
                        let next = machine.step_of(&q, y)?.clone();
                        if visited.insert(next.clone()) {
                            let mut h = history.clone();
                            h.push(y.clone());
                            queue.push_back((next, h));
                        }
                    }
                }
            }
        }

        if let Some(margin) = worst_margin {
            warnings.push(Warning::NumericallyMarginal { margin });
        }
        Ok(Verdict {
            status: if witness.is_some() {
                VerdictStatus::Fails
            } else {
                VerdictStatus::Holds
            },
            witness,
            depth_checked: depth_of(&depth_limit_opt),
            tolerance: epsilon,
            warnings,
        })
    }

    /// Literal unrolling of the bounded check for strategies or utilities
    /// without the structure the memoized path needs. Explores the full
    /// `|Y|^depth` history tree breadth-first (guarded).
    fn check_bounded_literal(
        &self,
        strategy: &IterStrategy<T>,
        utility: &UtilityFunctional<T>,
        depth: usize,
        epsilon: T,
    ) -> Result<Verdict<T>> {
        let mut approximate: Option<T> = None;
        let mut worst_margin: Option<T> = None;
        let mut witness = None;
        let mut visited_nodes = 0usize;

        let mut queue: VecDeque<(IterStrategy<T>, UtilityFunctional<T>, Vec<Value<T>>)> =
            VecDeque::from([(strategy.clone(), utility.clone(), Vec::new())]);
        'search: while let Some((sigma, k, history)) = queue.pop_front() {
            visited_nodes += 1;
            if visited_nodes > BOUNDED_NODE_GUARD {
                return Err(Error::EnumerationTooLarge {
                    size: visited_nodes as u128,
                    guard: BOUNDED_NODE_GUARD,
                });
            }

            // Stage continuation: for each next move, the value of the
            // stream that plays it and then follows the strategy.
            let rest_len = match k.prefix_length_for(epsilon, self.horizon_cap) {
                Some(len) => len.saturating_sub(1),
                None => {
                    let fallback = match k.kind() {
                        UtilityKind::Discounted => self.horizon_cap,
                        _ => k.horizon(),
                    };
                    fallback
                }
            };
            let mut table_entries = Vec::new();
            for y in self.stage.moves().iter() {
                let continuation_play =
                    self.play_stream(&sigma.reroot(y)?, rest_len)?.cons(y.clone());
                let eval = k.evaluate_prefix(&continuation_play)?;
                if !(eval.tail_bound <= epsilon) {
                    let worse = match approximate {
                        None => true,
                        Some(t) => eval.tail_bound > t,
                    };
                    if worse {
                        approximate = Some(eval.tail_bound);
                    }
                }
                table_entries.push((y.clone(), Value::num(eval.value)));
            }
            let table = Continuation::new(self.stage.moves(), table_entries)?;
            let now = sigma.now().clone();
            let ok = self.stage.as_game().is_equilibrium(&Value::Unit, &table, &now);
            if let Some(margin) = self.stage.as_game().margin(&Value::Unit, &table, &now) {
                if margin.abs() <= epsilon {
                    let closer = match worst_margin {
                        None => true,
                        Some(m) => margin.abs() < m.abs(),
                    };
                    if closer {
                        worst_margin = Some(margin);
                    }
                }
            }
            if !ok {
                let deviation = self
                    .stage
                    .strategies()
                    .iter()
                    .find(|alt| {
                        self.stage
                            .as_game()
                            .is_equilibrium(&Value::Unit, &table, alt)
                    })
                    .cloned();
                witness = Some(Witness {
                    history: StreamPrefix::new(history),
                    deviation,
                });
                break 'search;
            }

            if history.len() + 1 < depth {
                for y in self.stage.moves().iter() {
                    let shifted = match k.shift(y) {
                        Ok(k2) => k2,
                        // A constant functional shifts to itself.
                        Err(Error::HorizonExhausted) => k.clone(),
                        Err(e) => return Err(e),
                    };
                    let mut h = history.clone();
                    h.push(y.clone());
                    queue.push_back((sigma.reroot(y)?, shifted, h));
                }
            }
        }

        let mut warnings = Vec::new();
        if let Some(tail_bound) = approximate {
            warnings.push(Warning::ApproximateUtility { tail_bound });
        }
        if let Some(margin) = worst_margin {
            warnings.push(Warning::NumericallyMarginal { margin });
        }
        // Verdicts built on unboundable approximations are not definitive.
        let status = if approximate.is_some() && utility.kind() == UtilityKind::MeanPayoffApprox {
            VerdictStatus::Unknown
        } else if witness.is_some() {
            VerdictStatus::Fails
        } else {
            VerdictStatus::Holds
        };
        Ok(Verdict {
            status,
            witness,
            depth_checked: DepthChecked::Bounded(depth),
            tolerance: epsilon,
            warnings,
        })
    }
}

/// Infinite self-play move iterator.
pub struct SelfPlayIter<T: Scalar> {
    game: CoutilityFreeGame<T>,
    current: IterStrategy<T>,
}

impl<T: Scalar> Iterator for SelfPlayIter<T> {
    type Item = Value<T>;

    fn next(&mut self) -> Option<Self::Item> {
        let y = self.game.play_of(self.current.now());
        self.current = self
            .current
            .reroot(&y)
            .expect("played move stays inside the validated move set");
        Some(y)
    }
}
