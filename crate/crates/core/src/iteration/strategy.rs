//! Finite representations of history-dependent strategies.
//!
//! A strategy of the iterated game maps every finite move history to a stage
//! strategy. Two finite fragments are implemented: finite-state transducers
//! (grim trigger, tit-for-tat, and friends are all finite-memory) and
//! exhaustive bounded-depth tables, which make depth-bounded checks exact.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::finset::FinSet;
use crate::scalar::Scalar;
use crate::value::Value;

/// A finite-state machine assigning a stage strategy to every move history:
/// the strategy at history `w` is `stage(step*(initial, w))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyTransducer<T: Scalar> {
    states: FinSet<T>,
    initial: Value<T>,
    stage: BTreeMap<Value<T>, Value<T>>,
    step: BTreeMap<Value<T>, BTreeMap<Value<T>, Value<T>>>,
    moves: FinSet<T>,
}

impl<T: Scalar> StrategyTransducer<T> {
    /// Validates totality of `stage` and `step` over the declared states and
    /// moves, checks stage strategies against `stage_strategies`, and prunes
    /// states unreachable from `initial` (preserving declaration order).
    pub fn new(
        states: FinSet<T>,
        initial: Value<T>,
        stage: BTreeMap<Value<T>, Value<T>>,
        step: BTreeMap<Value<T>, BTreeMap<Value<T>, Value<T>>>,
        moves: FinSet<T>,
        stage_strategies: &FinSet<T>,
    ) -> Result<Self> {
        if !states.contains(&initial) {
            return Err(Error::InvalidParameter {
                what: "transducer",
                message: format!("initial state `{initial}` is not a declared state"),
            });
        }
        for q in states.iter() {
            let s = stage.get(q).ok_or_else(|| Error::MissingEntry {
                function: "stage",
                key: q.to_string(),
            })?;
            if !stage_strategies.contains(s) {
                return Err(Error::UnknownMove {
                    label: s.to_string(),
                });
            }
            let row = step.get(q).ok_or_else(|| Error::MissingEntry {
                function: "step",
                key: q.to_string(),
            })?;
            for y in moves.iter() {
                let next = row.get(y).ok_or_else(|| Error::MissingEntry {
                    function: "step",
                    key: format!("{q}, {y}"),
                })?;
                if !states.contains(next) {
                    return Err(Error::InvalidParameter {
                        what: "transducer",
                        message: format!("step({q}, {y}) leaves the state set"),
                    });
                }
            }
        }

        // Reachability under arbitrary inputs, in move-set order.
        let mut reachable = BTreeSet::new();
        let mut queue = VecDeque::from([initial.clone()]);
        reachable.insert(initial.clone());
        while let Some(q) = queue.pop_front() {
            for y in moves.iter() {
                let next = &step[&q][y];
                if reachable.insert(next.clone()) {
                    queue.push_back(next.clone());
                }
            }
        }
        let states = FinSet::new(states.iter().filter(|q| reachable.contains(q)).cloned())
            .expect("filtered set stays duplicate-free");
        let stage = stage
            .into_iter()
            .filter(|(q, _)| reachable.contains(q))
            .collect();
        let step = step
            .into_iter()
            .filter(|(q, _)| reachable.contains(q))
            .collect();

        Ok(StrategyTransducer {
            states,
            initial,
            stage,
            step,
            moves,
        })
    }

    pub fn states(&self) -> &FinSet<T> {
        &self.states
    }

    pub fn initial(&self) -> &Value<T> {
        &self.initial
    }

    pub fn moves(&self) -> &FinSet<T> {
        &self.moves
    }

    pub fn stage_of(&self, state: &Value<T>) -> &Value<T> {
        &self.stage[state]
    }

    pub fn step_of(&self, state: &Value<T>, y: &Value<T>) -> Result<&Value<T>> {
        self.step
            .get(state)
            .and_then(|row| row.get(y))
            .ok_or_else(|| Error::UnknownMove {
                label: y.to_string(),
            })
    }

    /// Stage strategy played at the root.
    pub fn now(&self) -> &Value<T> {
        &self.stage[&self.initial]
    }

    /// The state reached from the initial state along `history`.
    pub fn state_at(&self, history: &[Value<T>]) -> Result<&Value<T>> {
        let mut q = &self.initial;
        for y in history {
            q = self.step_of(q, y)?;
        }
        Ok(q)
    }

    pub fn stage_at(&self, history: &[Value<T>]) -> Result<&Value<T>> {
        Ok(&self.stage[self.state_at(history)?])
    }

    /// The same machine restarted after observing `y`. Keeps the full state
    /// space so repeated re-rooting shares structure.
    pub fn reroot(&self, y: &Value<T>) -> Result<Self> {
        let initial = self.step_of(&self.initial, y)?.clone();
        Ok(StrategyTransducer {
            initial,
            ..self.clone()
        })
    }

    /// Exhaustive bounded-depth table with the same behavior on histories
    /// shorter than `depth`; beyond that the table answers with the stage
    /// strategy of the root.
    pub fn to_depth_table(&self, depth: usize) -> Result<DepthTable<T>> {
        let mut table = BTreeMap::new();
        let mut frontier = vec![(Vec::new(), self.initial.clone())];
        for _ in 0..depth {
            let mut next = Vec::new();
            for (history, q) in frontier {
                table.insert(history.clone(), self.stage[&q].clone());
                for y in self.moves.iter() {
                    let mut extended = history.clone();
                    extended.push(y.clone());
                    next.push((extended, self.step[&q][y].clone()));
                }
                if table.len() > crate::conditioning::MAX_CONDITIONED_STRATEGIES {
                    return Err(Error::EnumerationTooLarge {
                        size: table.len() as u128,
                        guard: crate::conditioning::MAX_CONDITIONED_STRATEGIES,
                    });
                }
            }
            frontier = next;
        }
        DepthTable::new(depth, table, self.now().clone(), self.moves.clone())
    }
}

/// An exhaustive table over all histories shorter than `depth`, answering
/// `default` beyond.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthTable<T: Scalar> {
    depth: usize,
    table: BTreeMap<Vec<Value<T>>, Value<T>>,
    default: Value<T>,
    moves: FinSet<T>,
}

impl<T: Scalar> DepthTable<T> {
    pub fn new(
        depth: usize,
        table: BTreeMap<Vec<Value<T>>, Value<T>>,
        default: Value<T>,
        moves: FinSet<T>,
    ) -> Result<Self> {
        let mut expected: u128 = 0;
        let mut layer: u128 = 1;
        for _ in 0..depth {
            expected += layer;
            layer = layer.saturating_mul(moves.len() as u128);
        }
        if table.len() as u128 != expected {
            return Err(Error::MissingEntry {
                function: "depth table",
                key: format!("expected {expected} histories, found {}", table.len()),
            });
        }
        for history in table.keys() {
            if history.len() >= depth {
                return Err(Error::InvalidParameter {
                    what: "depth table",
                    message: format!("history of length {} at depth {depth}", history.len()),
                });
            }
            for y in history {
                if !moves.contains(y) {
                    return Err(Error::UnknownMove {
                        label: y.to_string(),
                    });
                }
            }
        }
        Ok(DepthTable {
            depth,
            table,
            default,
            moves,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn default_stage(&self) -> &Value<T> {
        &self.default
    }

    pub fn moves(&self) -> &FinSet<T> {
        &self.moves
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<Value<T>>, &Value<T>)> {
        self.table.iter()
    }

    pub fn stage_at(&self, history: &[Value<T>]) -> &Value<T> {
        if history.len() < self.depth {
            self.table
                .get(history)
                .unwrap_or_else(|| panic!("depth table missing validated history"))
        } else {
            &self.default
        }
    }

    pub fn now(&self) -> &Value<T> {
        self.stage_at(&[])
    }

    /// The table after observing `y`: one level shallower, restricted to
    /// histories starting with `y`.
    pub fn reroot(&self, y: &Value<T>) -> Result<Self> {
        if !self.moves.contains(y) {
            return Err(Error::UnknownMove {
                label: y.to_string(),
            });
        }
        if self.depth == 0 {
            return Ok(self.clone());
        }
        let table = self
            .table
            .iter()
            .filter(|(history, _)| history.first() == Some(y))
            .map(|(history, s)| (history[1..].to_vec(), s.clone()))
            .collect();
        DepthTable::new(self.depth - 1, table, self.default.clone(), self.moves.clone())
    }

    /// Equivalent transducer: states are the table's histories plus one sink
    /// for everything at or beyond the depth.
    pub fn to_transducer(&self, stage_strategies: &FinSet<T>) -> Result<StrategyTransducer<T>> {
        let sink = Value::sym("beyond-depth");
        let encode = |history: &[Value<T>]| -> Value<T> {
            // Histories encoded as nested pairs rooted at a marker symbol.
            let mut v = Value::sym("history");
            for y in history {
                v = Value::pair(v, y.clone());
            }
            v
        };
        let mut states = Vec::new();
        let mut stage = BTreeMap::new();
        let mut step: BTreeMap<Value<T>, BTreeMap<Value<T>, Value<T>>> = BTreeMap::new();
        for (history, s) in &self.table {
            let q = encode(history);
            states.push(q.clone());
            stage.insert(q.clone(), s.clone());
            let mut row = BTreeMap::new();
            for y in self.moves.iter() {
                let mut extended = history.clone();
                extended.push(y.clone());
                let next = if extended.len() < self.depth {
                    encode(&extended)
                } else {
                    sink.clone()
                };
                row.insert(y.clone(), next);
            }
            step.insert(q, row);
        }
        states.push(sink.clone());
        stage.insert(sink.clone(), self.default.clone());
        step.insert(
            sink.clone(),
            self.moves.iter().map(|y| (y.clone(), sink.clone())).collect(),
        );
        let initial = if self.depth == 0 { sink } else { encode(&[]) };
        StrategyTransducer::new(
            FinSet::new(states)?,
            initial,
            stage,
            step,
            self.moves.clone(),
            stage_strategies,
        )
    }
}

/// Either finite representation of an iterated-game strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IterStrategy<T: Scalar> {
    Machine(StrategyTransducer<T>),
    Table(DepthTable<T>),
}

impl<T: Scalar> IterStrategy<T> {
    pub fn now(&self) -> &Value<T> {
        match self {
            IterStrategy::Machine(m) => m.now(),
            IterStrategy::Table(t) => t.now(),
        }
    }

    pub fn moves(&self) -> &FinSet<T> {
        match self {
            IterStrategy::Machine(m) => m.moves(),
            IterStrategy::Table(t) => t.moves(),
        }
    }

    pub fn stage_at(&self, history: &[Value<T>]) -> Result<Value<T>> {
        match self {
            IterStrategy::Machine(m) => m.stage_at(history).cloned(),
            IterStrategy::Table(t) => Ok(t.stage_at(history).clone()),
        }
    }

    /// The strategy after observing `y` (the "later" part of the final
    /// coalgebra structure).
    pub fn reroot(&self, y: &Value<T>) -> Result<IterStrategy<T>> {
        Ok(match self {
            IterStrategy::Machine(m) => IterStrategy::Machine(m.reroot(y)?),
            IterStrategy::Table(t) => IterStrategy::Table(t.reroot(y)?),
        })
    }

    /// Canonical key for memoized traversal: machines are identified by their
    /// current state, tables by their remaining contents.
    pub(crate) fn memo_key(&self) -> Value<T> {
        match self {
            IterStrategy::Machine(m) => m.initial().clone(),
            IterStrategy::Table(t) => Value::sym(format!(
                "table|{}|{}|{}",
                t.depth(),
                t.default_stage(),
                t.table
                    .iter()
                    .map(|(h, s)| format!(
                        "{}>{s}",
                        h.iter().map(|y| y.to_string()).collect::<Vec<_>>().join(".")
                    ))
                    .collect::<Vec<_>>()
                    .join(";")
            )),
        }
    }
}

impl<T: Scalar> From<StrategyTransducer<T>> for IterStrategy<T> {
    fn from(m: StrategyTransducer<T>) -> Self {
        IterStrategy::Machine(m)
    }
}

impl<T: Scalar> From<DepthTable<T>> for IterStrategy<T> {
    fn from(t: DepthTable<T>) -> Self {
        IterStrategy::Table(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(ls: &[&str]) -> FinSet<f64> {
        FinSet::from_labels(ls.to_vec()).unwrap()
    }

    fn two_state_machine() -> StrategyTransducer<f64> {
        // Cooperate until `d` is observed, then defect forever.
        let states = labels(&["calm", "angry"]);
        let moves = labels(&["c", "d"]);
        let stage_strategies = labels(&["C", "D"]);
        let stage = [
            (Value::sym("calm"), Value::sym("C")),
            (Value::sym("angry"), Value::sym("D")),
        ]
        .into_iter()
        .collect();
        let step = [
            (
                Value::sym("calm"),
                [
                    (Value::sym("c"), Value::sym("calm")),
                    (Value::sym("d"), Value::sym("angry")),
                ]
                .into_iter()
                .collect(),
            ),
            (
                Value::sym("angry"),
                [
                    (Value::sym("c"), Value::sym("angry")),
                    (Value::sym("d"), Value::sym("angry")),
                ]
                .into_iter()
                .collect(),
            ),
        ]
        .into_iter()
        .collect();
        StrategyTransducer::new(states, Value::sym("calm"), stage, step, moves, &stage_strategies)
            .unwrap()
    }

    #[test]
    fn unreachable_states_are_pruned() {
        let m = two_state_machine();
        let mut stage = m.stage.clone();
        stage.insert(Value::sym("limbo"), Value::sym("C"));
        let mut step = m.step.clone();
        step.insert(
            Value::sym("limbo"),
            m.moves
                .iter()
                .map(|y| (y.clone(), Value::sym("limbo")))
                .collect(),
        );
        let with_extra = StrategyTransducer::new(
            labels(&["calm", "angry", "limbo"]),
            Value::sym("calm"),
            stage,
            step,
            m.moves.clone(),
            &labels(&["C", "D"]),
        )
        .unwrap();
        assert_eq!(with_extra.states().len(), 2);
    }

    #[test]
    fn missing_step_entry_rejected() {
        let m = two_state_machine();
        let mut step = m.step.clone();
        step.get_mut(&Value::sym("calm")).unwrap().remove(&Value::sym("d"));
        let err = StrategyTransducer::new(
            m.states.clone(),
            m.initial.clone(),
            m.stage.clone(),
            step,
            m.moves.clone(),
            &labels(&["C", "D"]),
        )
        .unwrap_err();
        assert_eq!(err.kind(), "missing_entry");
    }

    #[test]
    fn reroot_and_history_walk_agree() {
        let m = two_state_machine();
        let rerooted = m.reroot(&Value::sym("d")).unwrap();
        assert_eq!(rerooted.now(), &Value::sym("D"));
        assert_eq!(
            m.stage_at(&[Value::sym("c"), Value::sym("d"), Value::sym("c")]).unwrap(),
            &Value::sym("D")
        );
    }

    #[test]
    fn single_state_reroot_is_identity() {
        let moves = labels(&["c", "d"]);
        let m = StrategyTransducer::new(
            labels(&["q"]),
            Value::sym("q"),
            [(Value::sym("q"), Value::sym("C"))].into_iter().collect(),
            [(
                Value::sym("q"),
                moves.iter().map(|y| (y.clone(), Value::sym("q"))).collect(),
            )]
            .into_iter()
            .collect(),
            moves,
            &labels(&["C"]),
        )
        .unwrap();
        assert_eq!(m.reroot(&Value::sym("c")).unwrap(), m);
    }

    #[test]
    fn depth_table_round_trips_through_transducer() {
        let m = two_state_machine();
        let table = m.to_depth_table(3).unwrap();
        // Behavior below the depth matches the machine.
        for history in [
            vec![],
            vec![Value::sym("c")],
            vec![Value::sym("d"), Value::sym("c")],
        ] {
            assert_eq!(table.stage_at(&history), m.stage_at(&history).unwrap());
        }
        let back = table.to_transducer(&labels(&["C", "D"])).unwrap();
        for history in [
            vec![],
            vec![Value::sym("d")],
            vec![Value::sym("c"), Value::sym("d")],
        ] {
            assert_eq!(
                back.stage_at(&history).unwrap(),
                m.stage_at(&history).unwrap()
            );
        }
    }

    #[test]
    fn depth_table_reroot_drops_a_level() {
        let m = two_state_machine();
        let table = m.to_depth_table(3).unwrap();
        let rerooted = table.reroot(&Value::sym("d")).unwrap();
        assert_eq!(rerooted.depth(), 2);
        assert_eq!(rerooted.now(), &Value::sym("D"));
    }

    #[test]
    fn depth_table_totality_enforced() {
        let moves = labels(&["c", "d"]);
        let err = DepthTable::new(
            2,
            [(vec![], Value::sym("C"))].into_iter().collect(),
            Value::sym("C"),
            moves,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "missing_entry");
    }
}
