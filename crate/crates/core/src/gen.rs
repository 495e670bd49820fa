//! Seeded random instance generators for property suites and sampling.
//!
//! Everything is driven by a caller-supplied ChaCha RNG, so identical seeds
//! reproduce identical instances across runs and platforms. Generated games
//! use explicit equilibrium tables: the whole finite continuation space is
//! enumerated and each `(state, continuation, strategy)` triple is flipped
//! in independently.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::finset::{Carrier, FinSet};
use crate::game::{Continuation, OpenGame};
use crate::iteration::{CoalgebraEquilibrium, FiniteCoalgebra, StrategyTransducer};
use crate::scalar::Scalar;
use crate::two_cells::CoutilityFreeGame;
use crate::utility::UtilityFunctional;
use crate::value::Value;

/// Size bounds for generated symbolic games.
#[derive(Debug, Clone, Copy)]
pub struct GameDims {
    pub states: usize,
    pub coutilities: usize,
    pub moves: usize,
    pub utilities: usize,
    pub strategies: usize,
}

impl GameDims {
    /// Uniform sizes in `1..=max` for every component.
    pub fn sample(rng: &mut ChaCha8Rng, max: usize) -> GameDims {
        GameDims {
            states: rng.gen_range(1..=max),
            coutilities: rng.gen_range(1..=max),
            moves: rng.gen_range(1..=max),
            utilities: rng.gen_range(1..=max),
            strategies: rng.gen_range(1..=max),
        }
    }
}

fn labeled<T: Scalar>(prefix: &str, n: usize) -> FinSet<T> {
    FinSet::from_labels((0..n).map(|i| format!("{prefix}{i}"))).expect("distinct labels")
}

/// A random table-backed open game with the given boundary sets.
pub fn random_game_between<T: Scalar>(
    rng: &mut ChaCha8Rng,
    states: FinSet<T>,
    coutilities: FinSet<T>,
    moves: FinSet<T>,
    utilities: FinSet<T>,
    strategies: usize,
) -> OpenGame<T> {
    let strategies = labeled("sg", strategies);
    let pick = |rng: &mut ChaCha8Rng, set: &FinSet<T>| -> Value<T> {
        set.get(rng.gen_range(0..set.len())).unwrap().clone()
    };

    let mut play = BTreeMap::new();
    for sigma in strategies.iter() {
        for x in states.iter() {
            play.insert((sigma.clone(), x.clone()), pick(rng, &moves));
        }
    }
    let mut coutility = BTreeMap::new();
    for sigma in strategies.iter() {
        for x in states.iter() {
            for r in utilities.iter() {
                coutility.insert(
                    (sigma.clone(), x.clone(), r.clone()),
                    pick(rng, &coutilities),
                );
            }
        }
    }
    // Explicit equilibrium table over the full finite continuation space.
    let k_space = FinSet::tables(&moves, &utilities, 1_000_000).expect("small spaces");
    let mut members = BTreeSet::new();
    for x in states.iter() {
        for k in &k_space {
            for sigma in strategies.iter() {
                if rng.gen_bool(0.5) {
                    members.insert((x.clone(), k.clone(), sigma.clone()));
                }
            }
        }
    }

    let play_fn = Arc::new(move |sigma: &Value<T>, x: &Value<T>| {
        play[&(sigma.clone(), x.clone())].clone()
    });
    let coutility_fn = Arc::new(move |sigma: &Value<T>, x: &Value<T>, r: &Value<T>| {
        coutility[&(sigma.clone(), x.clone(), r.clone())].clone()
    });
    let equilibrium = Arc::new(move |x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
        members.contains(&(x.clone(), k.canonical(), sigma.clone()))
    });

    OpenGame::new(
        states,
        Carrier::finite(coutilities),
        moves,
        Carrier::finite(utilities),
        strategies,
        play_fn,
        coutility_fn,
        equilibrium,
    )
}

/// A random game with fresh labeled boundary sets of the given sizes.
pub fn random_game<T: Scalar>(rng: &mut ChaCha8Rng, dims: GameDims) -> OpenGame<T> {
    let states = labeled("x", dims.states);
    let coutilities = labeled("s", dims.coutilities);
    let moves = labeled("y", dims.moves);
    let utilities = labeled("r", dims.utilities);
    random_game_between(rng, states, coutilities, moves, utilities, dims.strategies)
}

/// A chain of `length` composable games with component sizes at most `max`.
pub fn random_composable_chain<T: Scalar>(
    rng: &mut ChaCha8Rng,
    length: usize,
    max: usize,
) -> Vec<OpenGame<T>> {
    let mut boundary_sets = Vec::new();
    for i in 0..=length {
        boundary_sets.push((
            labeled::<T>(&format!("b{i}m"), rng.gen_range(1..=max)),
            labeled::<T>(&format!("b{i}u"), rng.gen_range(1..=max)),
        ));
    }
    (0..length)
        .map(|i| {
            let strategies = rng.gen_range(1..=max);
            random_game_between(
                rng,
                boundary_sets[i].0.clone(),
                boundary_sets[i].1.clone(),
                boundary_sets[i + 1].0.clone(),
                boundary_sets[i + 1].1.clone(),
                strategies,
            )
        })
        .collect()
}

/// A random symbolic coutility-free game with a table equilibrium.
pub fn random_coutility_free<T: Scalar>(
    rng: &mut ChaCha8Rng,
    max_moves: usize,
    max_utilities: usize,
    max_strategies: usize,
) -> CoutilityFreeGame<T> {
    let moves = labeled("y", rng.gen_range(1..=max_moves));
    let utilities = labeled("r", rng.gen_range(1..=max_utilities));
    let strategies = labeled("sg", rng.gen_range(1..=max_strategies));

    let mut play = BTreeMap::new();
    for sigma in strategies.iter() {
        let y = moves.get(rng.gen_range(0..moves.len())).unwrap().clone();
        play.insert(sigma.clone(), y);
    }
    let k_space = FinSet::tables(&moves, &utilities, 1_000_000).expect("small spaces");
    let mut members = BTreeSet::new();
    for k in &k_space {
        for sigma in strategies.iter() {
            if rng.gen_bool(0.5) {
                members.insert((k.clone(), sigma.clone()));
            }
        }
    }
    let equilibrium = Arc::new(move |_x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
        members.contains(&(k.canonical(), sigma.clone()))
    });
    CoutilityFreeGame::from_parts(
        moves,
        Carrier::finite(utilities),
        strategies,
        play,
        equilibrium,
    )
    .expect("generated parts are consistent")
}

/// A random transducer over a stage game, with up to `max_states` states.
pub fn random_transducer<T: Scalar>(
    rng: &mut ChaCha8Rng,
    stage: &CoutilityFreeGame<T>,
    max_states: usize,
) -> StrategyTransducer<T> {
    let n = rng.gen_range(1..=max_states);
    let states = labeled::<T>("q", n);
    let pick_strategy = |rng: &mut ChaCha8Rng| -> Value<T> {
        stage
            .strategies()
            .get(rng.gen_range(0..stage.strategies().len()))
            .unwrap()
            .clone()
    };
    let stage_map: BTreeMap<_, _> = states
        .iter()
        .map(|q| (q.clone(), pick_strategy(rng)))
        .collect();
    let step: BTreeMap<_, _> = states
        .iter()
        .map(|q| {
            let row: BTreeMap<_, _> = stage
                .moves()
                .iter()
                .map(|y| {
                    let next = states.get(rng.gen_range(0..n)).unwrap().clone();
                    (y.clone(), next)
                })
                .collect();
            (q.clone(), row)
        })
        .collect();
    StrategyTransducer::new(
        states,
        Value::sym("q0"),
        stage_map,
        step,
        stage.moves().clone(),
        stage.strategies(),
    )
    .expect("generated transducer is total")
}

/// A random machine-derived coalgebra over a stage game. When `utility` is
/// given, the carrier equilibrium is the sound exact-membership predicate;
/// otherwise it is empty.
pub fn random_coalgebra<T: Scalar>(
    rng: &mut ChaCha8Rng,
    stage: &CoutilityFreeGame<T>,
    max_states: usize,
    utility: Option<(UtilityFunctional<T>, T)>,
) -> Result<FiniteCoalgebra<T>> {
    let machine = random_transducer(rng, stage, max_states);
    let equilibrium = match utility {
        None => CoalgebraEquilibrium::Empty,
        Some((utility, epsilon)) => CoalgebraEquilibrium::ExactSubgamePerfect { utility, epsilon },
    };
    FiniteCoalgebra::from_transducer(stage, &machine, equilibrium)
}
