//! Finite open games and their monoidal structure.
//!
//! An open game between set-pairs `(X,S) -> (Y,R)` packages a finite strategy
//! set with a play function, a coutility function, and a decidable
//! equilibrium predicate. Games compose sequentially (the coutility of the
//! second game feeds the continuation of the first) and in parallel
//! (componentwise, with each side judged against the continuation induced by
//! the other side's actual play).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::finset::{Carrier, FinSet};
use crate::scalar::Scalar;
use crate::value::Value;

/// A utility assignment `k : Y -> R`, the argument of every equilibrium
/// predicate. Total on the move set it was built against; equality is
/// pointwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Continuation<T: Scalar> {
    table: BTreeMap<Value<T>, Value<T>>,
}

impl<T: Scalar> Continuation<T> {
    /// Builds a continuation and checks totality against `moves`.
    pub fn new(
        moves: &FinSet<T>,
        entries: impl IntoIterator<Item = (Value<T>, Value<T>)>,
    ) -> Result<Self> {
        let table: BTreeMap<_, _> = entries.into_iter().collect();
        for y in moves.iter() {
            if !table.contains_key(y) {
                return Err(Error::MissingEntry {
                    function: "continuation",
                    key: y.to_string(),
                });
            }
        }
        for key in table.keys() {
            if !moves.contains(key) {
                return Err(Error::UnknownMove {
                    label: key.to_string(),
                });
            }
        }
        Ok(Continuation { table })
    }

    pub fn from_fn(moves: &FinSet<T>, f: impl Fn(&Value<T>) -> Value<T>) -> Self {
        Continuation {
            table: moves.iter().map(|y| (y.clone(), f(y))).collect(),
        }
    }

    pub fn get(&self, y: &Value<T>) -> &Value<T> {
        self.table
            .get(y)
            .unwrap_or_else(|| panic!("continuation not defined at `{y}`"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Value<T>, &Value<T>)> {
        self.table.iter()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Canonical table value, used to key explicit equilibrium tables.
    pub fn canonical(&self) -> Value<T> {
        Value::table(self.table.iter().map(|(k, v)| (k.clone(), v.clone())))
            .expect("continuation keys are distinct")
    }
}

pub type PlayFn<T> = Arc<dyn Fn(&Value<T>, &Value<T>) -> Value<T> + Send + Sync>;
pub type CoutilityFn<T> = Arc<dyn Fn(&Value<T>, &Value<T>, &Value<T>) -> Value<T> + Send + Sync>;
pub type EquilibriumFn<T> =
    Arc<dyn Fn(&Value<T>, &Continuation<T>, &Value<T>) -> bool + Send + Sync>;
/// Optional signed advantage of the tested strategy over its best deviation:
/// membership holds iff the margin is at least `-epsilon`, and comparisons
/// within `epsilon` of equality are ties. Exposed by library constructors so
/// verdicts can flag numerically marginal decisions.
pub type MarginFn<T> = Arc<dyn Fn(&Value<T>, &Continuation<T>, &Value<T>) -> T + Send + Sync>;

/// A finite open game `(X,S) -> (Y,R)`.
#[derive(Clone)]
pub struct OpenGame<T: Scalar> {
    states: FinSet<T>,
    coutility_carrier: Carrier<T>,
    moves: FinSet<T>,
    utility_carrier: Carrier<T>,
    strategies: FinSet<T>,
    play: PlayFn<T>,
    coutility: CoutilityFn<T>,
    equilibrium: EquilibriumFn<T>,
    margin: Option<MarginFn<T>>,
    affine_invariant: bool,
    builtin_equilibrium: Option<(String, T)>,
}

impl<T: Scalar> std::fmt::Debug for OpenGame<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenGame")
            .field("X", &self.states.to_string())
            .field("S", &self.coutility_carrier.to_string())
            .field("Y", &self.moves.to_string())
            .field("R", &self.utility_carrier.to_string())
            .field("strategies", &self.strategies.to_string())
            .field("affine_invariant", &self.affine_invariant)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> OpenGame<T> {
    pub fn new(
        states: FinSet<T>,
        coutility_carrier: Carrier<T>,
        moves: FinSet<T>,
        utility_carrier: Carrier<T>,
        strategies: FinSet<T>,
        play: PlayFn<T>,
        coutility: CoutilityFn<T>,
        equilibrium: EquilibriumFn<T>,
    ) -> Self {
        OpenGame {
            states,
            coutility_carrier,
            moves,
            utility_carrier,
            strategies,
            play,
            coutility,
            equilibrium,
            margin: None,
            affine_invariant: false,
            builtin_equilibrium: None,
        }
    }

    /// Declares the equilibrium invariant under positive affine maps of the
    /// continuation. Licenses the exact membership decision in iteration.
    pub fn with_affine_invariance(mut self, flag: bool) -> Self {
        self.affine_invariant = flag;
        self
    }

    pub fn with_margin(mut self, margin: MarginFn<T>) -> Self {
        self.margin = Some(margin);
        self
    }

    /// Records that the equilibrium predicate is one of the named builtins,
    /// so serialization can emit the name instead of a materialized table.
    pub fn with_builtin_equilibrium(mut self, name: impl Into<String>, epsilon: T) -> Self {
        self.builtin_equilibrium = Some((name.into(), epsilon));
        self
    }

    pub fn builtin_equilibrium(&self) -> Option<(&str, T)> {
        self.builtin_equilibrium
            .as_ref()
            .map(|(name, eps)| (name.as_str(), *eps))
    }

    pub fn states(&self) -> &FinSet<T> {
        &self.states
    }

    pub fn coutility_carrier(&self) -> &Carrier<T> {
        &self.coutility_carrier
    }

    pub fn moves(&self) -> &FinSet<T> {
        &self.moves
    }

    pub fn utility_carrier(&self) -> &Carrier<T> {
        &self.utility_carrier
    }

    pub fn strategies(&self) -> &FinSet<T> {
        &self.strategies
    }

    pub fn affine_invariant(&self) -> bool {
        self.affine_invariant
    }

    pub fn play(&self, strategy: &Value<T>, state: &Value<T>) -> Value<T> {
        (self.play)(strategy, state)
    }

    pub fn coutility(&self, strategy: &Value<T>, state: &Value<T>, utility: &Value<T>) -> Value<T> {
        (self.coutility)(strategy, state, utility)
    }

    pub fn is_equilibrium(
        &self,
        state: &Value<T>,
        continuation: &Continuation<T>,
        strategy: &Value<T>,
    ) -> bool {
        (self.equilibrium)(state, continuation, strategy)
    }

    pub fn margin(
        &self,
        state: &Value<T>,
        continuation: &Continuation<T>,
        strategy: &Value<T>,
    ) -> Option<T> {
        self.margin.as_ref().map(|m| m(state, continuation, strategy))
    }

    /// Materializes the equilibrium set at `(state, continuation)`, in
    /// strategy-set order.
    pub fn equilibrium_set(
        &self,
        state: &Value<T>,
        continuation: &Continuation<T>,
    ) -> Result<Vec<Value<T>>> {
        if !self.states.contains(state) {
            return Err(Error::InvalidParameter {
                what: "state",
                message: format!("`{state}` is not in the state set"),
            });
        }
        for y in self.moves.iter() {
            let r = continuation.get(y);
            if !self.utility_carrier.contains(r) {
                return Err(Error::InvalidParameter {
                    what: "continuation",
                    message: format!("value `{r}` at `{y}` is outside the utility carrier"),
                });
            }
        }
        Ok(self
            .strategies
            .iter()
            .filter(|sigma| self.is_equilibrium(state, continuation, sigma))
            .cloned()
            .collect())
    }

    /// Rebases the state set along a bijection `new_x -> old_x`, leaving all
    /// other data untouched. Plumbing for strict-monoidal bookkeeping such as
    /// `Y x 1 = Y`.
    pub(crate) fn reindex_states(
        &self,
        new_states: FinSet<T>,
        embed: impl Fn(&Value<T>) -> Value<T> + Send + Sync + 'static,
    ) -> OpenGame<T> {
        let embed = Arc::new(embed);
        let play = {
            let inner = Arc::clone(&self.play);
            let embed = Arc::clone(&embed);
            Arc::new(move |sigma: &Value<T>, x: &Value<T>| inner(sigma, &embed(x))) as PlayFn<T>
        };
        let coutility = {
            let inner = Arc::clone(&self.coutility);
            let embed = Arc::clone(&embed);
            Arc::new(move |sigma: &Value<T>, x: &Value<T>, r: &Value<T>| {
                inner(sigma, &embed(x), r)
            }) as CoutilityFn<T>
        };
        let equilibrium = {
            let inner = Arc::clone(&self.equilibrium);
            let embed = Arc::clone(&embed);
            Arc::new(move |x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
                inner(&embed(x), k, sigma)
            }) as EquilibriumFn<T>
        };
        let margin = self.margin.as_ref().map(|m| {
            let inner = Arc::clone(m);
            let embed = Arc::clone(&embed);
            Arc::new(move |x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
                inner(&embed(x), k, sigma)
            }) as MarginFn<T>
        });
        OpenGame {
            states: new_states,
            coutility_carrier: self.coutility_carrier.clone(),
            moves: self.moves.clone(),
            utility_carrier: self.utility_carrier.clone(),
            strategies: self.strategies.clone(),
            play,
            coutility,
            equilibrium,
            margin,
            affine_invariant: self.affine_invariant,
            builtin_equilibrium: self.builtin_equilibrium.clone(),
        }
    }
}

/// The identity game on `(X,S)`: one strategy, play and coutility are
/// identities, every strategy is an equilibrium.
pub fn identity_game<T: Scalar>(states: FinSet<T>, coutility: Carrier<T>) -> OpenGame<T> {
    OpenGame::new(
        states.clone(),
        coutility.clone(),
        states,
        coutility,
        FinSet::unit(),
        Arc::new(|_, x| x.clone()),
        Arc::new(|_, _, s| s.clone()),
        Arc::new(|_, _, _| true),
    )
    .with_affine_invariance(true)
}

/// The identity game on the monoidal unit `(1,1)`.
pub fn unit_game<T: Scalar>() -> OpenGame<T> {
    identity_game(FinSet::unit(), Carrier::unit())
}

/// Sequential composition `h . g` of `g : (X,S) -> (Y,R)` and
/// `h : (Y,R) -> (Z,Q)`.
///
/// Strategies are pairs. Play threads `g` then `h`; coutility threads back in
/// reverse, using `g`'s play to produce the state `h` sees. A pair
/// `(s1, s2)` is an equilibrium at `(x, k)` when `s1` is optimal for the
/// continuation obtained by pushing `k` back through `h`, and `s2` is optimal
/// at every state `g` could have produced, i.e. at `play_g(s', x)` for every
/// strategy `s'` of `g`.
pub fn compose<T: Scalar>(g: &OpenGame<T>, h: &OpenGame<T>) -> Result<OpenGame<T>> {
    if g.moves != *h.states() || g.utility_carrier != *h.coutility_carrier() {
        return Err(Error::BoundaryMismatch {
            context: "compose",
            expected: format!("({}, {})", g.moves, g.utility_carrier),
            found: format!("({}, {})", h.states(), h.coutility_carrier()),
        });
    }
    let strategies = g.strategies.product(&h.strategies);

    let play = {
        let (g, h) = (g.clone(), h.clone());
        Arc::new(move |sigma: &Value<T>, x: &Value<T>| {
            let (s1, s2) = sigma.expect_pair();
            h.play(s2, &g.play(s1, x))
        }) as PlayFn<T>
    };
    let coutility = {
        let (g, h) = (g.clone(), h.clone());
        Arc::new(move |sigma: &Value<T>, x: &Value<T>, q: &Value<T>| {
            let (s1, s2) = sigma.expect_pair();
            let y = g.play(s1, x);
            let r = h.coutility(s2, &y, q);
            g.coutility(s1, x, &r)
        }) as CoutilityFn<T>
    };
    let equilibrium = {
        let (g, h) = (g.clone(), h.clone());
        Arc::new(move |x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
            let (s1, s2) = sigma.expect_pair();
            let pushed = Continuation::from_fn(g.moves(), |y| {
                let z = h.play(s2, y);
                h.coutility(s2, y, k.get(&z))
            });
            g.is_equilibrium(x, &pushed, s1)
                && g.strategies()
                    .iter()
                    .all(|s_alt| h.is_equilibrium(&g.play(s_alt, x), k, s2))
        }) as EquilibriumFn<T>
    };

    Ok(OpenGame::new(
        g.states.clone(),
        g.coutility_carrier.clone(),
        h.moves.clone(),
        h.utility_carrier.clone(),
        strategies,
        play,
        coutility,
        equilibrium,
    ))
}

/// Parallel composition `g (x) h`.
///
/// Everything acts componentwise; each side's equilibrium is judged against
/// the continuation slice induced by the other side's actual play.
pub fn tensor<T: Scalar>(g: &OpenGame<T>, h: &OpenGame<T>) -> OpenGame<T> {
    let strategies = g.strategies.product(&h.strategies);
    let states = g.states.product(&h.states);
    let moves = g.moves.product(&h.moves);
    let coutility_carrier = Carrier::product(&g.coutility_carrier, &h.coutility_carrier);
    let utility_carrier = Carrier::product(&g.utility_carrier, &h.utility_carrier);

    let play = {
        let (g, h) = (g.clone(), h.clone());
        Arc::new(move |sigma: &Value<T>, x: &Value<T>| {
            let (s1, s2) = sigma.expect_pair();
            let (x1, x2) = x.expect_pair();
            Value::pair(g.play(s1, x1), h.play(s2, x2))
        }) as PlayFn<T>
    };
    let coutility = {
        let (g, h) = (g.clone(), h.clone());
        Arc::new(move |sigma: &Value<T>, x: &Value<T>, r: &Value<T>| {
            let (s1, s2) = sigma.expect_pair();
            let (x1, x2) = x.expect_pair();
            let (r1, r2) = r.expect_pair();
            Value::pair(g.coutility(s1, x1, r1), h.coutility(s2, x2, r2))
        }) as CoutilityFn<T>
    };
    let equilibrium = {
        let (g, h) = (g.clone(), h.clone());
        Arc::new(move |x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
            let (s1, s2) = sigma.expect_pair();
            let (x1, x2) = x.expect_pair();
            let y2_played = h.play(s2, x2);
            let k1 = Continuation::from_fn(g.moves(), |y1| {
                k.get(&Value::pair(y1.clone(), y2_played.clone()))
                    .expect_pair()
                    .0
                    .clone()
            });
            let y1_played = g.play(s1, x1);
            let k2 = Continuation::from_fn(h.moves(), |y2| {
                k.get(&Value::pair(y1_played.clone(), y2.clone()))
                    .expect_pair()
                    .1
                    .clone()
            });
            g.is_equilibrium(x1, &k1, s1) && h.is_equilibrium(x2, &k2, s2)
        }) as EquilibriumFn<T>
    };

    OpenGame::new(
        states,
        coutility_carrier,
        moves,
        utility_carrier,
        strategies,
        play,
        coutility,
        equilibrium,
    )
    .with_affine_invariance(g.affine_invariant && h.affine_invariant)
}

#[cfg(test)]
mod tests {
    use super::*;

    type V = Value<f64>;

    fn labels(ls: &[&str]) -> FinSet<f64> {
        FinSet::from_labels(ls.to_vec()).unwrap()
    }

    /// A fully table-driven game for tests.
    fn table_game(
        states: FinSet<f64>,
        s: FinSet<f64>,
        moves: FinSet<f64>,
        r: FinSet<f64>,
        strategies: FinSet<f64>,
        play: BTreeMap<(V, V), V>,
        coutility: BTreeMap<(V, V, V), V>,
        equilibria: std::collections::BTreeSet<(V, V, V)>,
    ) -> OpenGame<f64> {
        let play = Arc::new(move |sigma: &V, x: &V| {
            play.get(&(sigma.clone(), x.clone()))
                .cloned()
                .unwrap_or_else(|| panic!("play not defined at ({sigma}, {x})"))
        });
        let coutility = Arc::new(move |sigma: &V, x: &V, r: &V| {
            coutility
                .get(&(sigma.clone(), x.clone(), r.clone()))
                .cloned()
                .unwrap_or_else(|| panic!("coutility not defined at ({sigma}, {x}, {r})"))
        });
        let equilibrium = Arc::new(move |x: &V, k: &Continuation<f64>, sigma: &V| {
            equilibria.contains(&(x.clone(), k.canonical(), sigma.clone()))
        });
        OpenGame::new(
            states,
            Carrier::finite(s),
            moves,
            Carrier::finite(r),
            strategies,
            play,
            coutility,
            equilibrium,
        )
    }

    #[test]
    fn identity_game_examples() {
        let x = labels(&["x0", "x1"]);
        let s = labels(&["s0"]);
        let id = identity_game(x.clone(), Carrier::finite(s));
        let dot = Value::Unit;
        assert_eq!(id.play(&dot, &Value::sym("x0")), Value::sym("x0"));
        // Equilibrium holds for every state and continuation.
        let k = Continuation::from_fn(id.moves(), |_| Value::sym("s0"));
        for xv in x.iter() {
            assert!(id.is_equilibrium(xv, &k, &dot));
        }
        assert_eq!(id.equilibrium_set(&Value::sym("x1"), &k).unwrap(), vec![dot]);
    }

    #[test]
    fn compose_identity_with_identity() {
        let x = labels(&["x0"]);
        let s = labels(&["s0"]);
        let id1 = identity_game(x.clone(), Carrier::finite(s.clone()));
        let id2 = identity_game(x, Carrier::finite(s));
        let c = compose(&id1, &id2).unwrap();
        assert_eq!(c.strategies().len(), 1);
        assert_eq!(
            c.play(c.strategies().first().unwrap(), &Value::sym("x0")),
            Value::sym("x0")
        );
    }

    #[test]
    fn compose_rejects_boundary_mismatch() {
        let g = identity_game(labels(&["a"]), Carrier::finite(labels(&["s"])));
        let h = identity_game(labels(&["b"]), Carrier::finite(labels(&["s"])));
        let err = compose(&g, &h).unwrap_err();
        assert_eq!(err.kind(), "boundary_mismatch");
    }

    #[test]
    fn compose_constant_plays() {
        // Two one-strategy games with constant plays compose to the
        // composed constant play.
        let x = labels(&["x"]);
        let y = labels(&["y0", "y1"]);
        let z = labels(&["z0", "z1"]);
        let r = labels(&["r"]);
        let q = labels(&["q"]);
        let s = labels(&["s"]);
        let sg = labels(&["only"]);

        let mut play_g = BTreeMap::new();
        play_g.insert((Value::sym("only"), Value::sym("x")), Value::sym("y1"));
        let mut cout_g = BTreeMap::new();
        cout_g.insert(
            (Value::sym("only"), Value::sym("x"), Value::sym("r")),
            Value::sym("s"),
        );
        let g = table_game(
            x.clone(),
            s,
            y.clone(),
            r.clone(),
            sg.clone(),
            play_g,
            cout_g,
            Default::default(),
        );

        let mut play_h = BTreeMap::new();
        play_h.insert((Value::sym("only"), Value::sym("y0")), Value::sym("z0"));
        play_h.insert((Value::sym("only"), Value::sym("y1")), Value::sym("z0"));
        let mut cout_h = BTreeMap::new();
        for yv in y.iter() {
            cout_h.insert(
                (Value::sym("only"), yv.clone(), Value::sym("q")),
                Value::sym("r"),
            );
        }
        let h = table_game(
            y,
            r,
            z,
            q,
            sg,
            play_h,
            cout_h,
            Default::default(),
        );

        let c = compose(&g, &h).unwrap();
        let sigma = c.strategies().first().unwrap().clone();
        assert_eq!(c.play(&sigma, &Value::sym("x")), Value::sym("z0"));
        assert_eq!(
            c.coutility(&sigma, &Value::sym("x"), &Value::sym("q")),
            Value::sym("s")
        );
    }

    #[test]
    fn empty_state_set_is_allowed() {
        let id = identity_game(FinSet::<f64>::empty(), Carrier::finite(labels(&["s"])));
        assert!(id.states().is_empty());
    }
}
