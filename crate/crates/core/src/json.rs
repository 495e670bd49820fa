//! JSON file formats for games, morphisms, strategies, bimatrices, utility
//! functionals, and verdicts.
//!
//! Set elements appear as their canonical text form (`Value::parse` /
//! `Display`), so pairs read as `"C,D"` and tables as `"{a:m1,b:m2}"`.
//! Equilibria are either a builtin name (`always`, `never`, `argmax`,
//! `nash`) or an explicit table of `(state, continuation, strategy)` triples
//! listing exactly the members.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finset::{Carrier, FinSet};
use crate::game::{Continuation, EquilibriumFn, OpenGame};
use crate::iteration::{
    CoalgebraEquilibrium, DepthTable, FiniteCoalgebra, IterStrategy, StrategyTransducer, Verdict,
};
use crate::library::{builtins, Bimatrix};
use crate::scalar::Scalar;
use crate::two_cells::{CoutilityFreeGame, GameMorphism};
use crate::value::Value;

const DEFAULT_EPSILON: f64 = 1e-9;

/// Cap on materialized equilibrium tables when saving games.
pub const SERIALIZATION_GUARD: usize = 250_000;

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    }
}

fn schema(message: impl Into<String>) -> Error {
    Error::Schema {
        message: message.into(),
    }
}

fn parse_values<T: Scalar>(labels: &[String]) -> Result<Vec<Value<T>>> {
    labels.iter().map(|l| Value::parse(l)).collect()
}

fn parse_finset<T: Scalar>(labels: &[String], what: &str) -> Result<FinSet<T>> {
    FinSet::new(parse_values(labels)?).map_err(|e| schema(format!("{what}: {e}")))
}

// ---------------------------------------------------------------------------
// Games
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum CarrierDto {
    Finite(Vec<String>),
    Numeric { num_dim: usize },
    Product { product: [Box<CarrierDto>; 2] },
}

impl CarrierDto {
    fn to_carrier<T: Scalar>(&self, what: &str) -> Result<Carrier<T>> {
        Ok(match self {
            CarrierDto::Finite(labels) => Carrier::Finite(parse_finset(labels, what)?),
            CarrierDto::Numeric { num_dim } => Carrier::Numeric { dim: *num_dim },
            CarrierDto::Product { product } => Carrier::Product(
                Box::new(product[0].to_carrier(what)?),
                Box::new(product[1].to_carrier(what)?),
            ),
        })
    }

    fn from_carrier<T: Scalar>(carrier: &Carrier<T>) -> CarrierDto {
        match carrier {
            Carrier::Finite(set) => {
                CarrierDto::Finite(set.iter().map(|v| v.to_string()).collect())
            }
            Carrier::Numeric { dim } => CarrierDto::Numeric { num_dim: *dim },
            Carrier::Product(a, b) => CarrierDto::Product {
                product: [
                    Box::new(CarrierDto::from_carrier(a)),
                    Box::new(CarrierDto::from_carrier(b)),
                ],
            },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DomDto {
    #[serde(rename = "X")]
    x: Vec<String>,
    #[serde(rename = "S")]
    s: CarrierDto,
}

#[derive(Debug, Serialize, Deserialize)]
struct CodDto {
    #[serde(rename = "Y")]
    y: Vec<String>,
    #[serde(rename = "R")]
    r: CarrierDto,
}

#[derive(Debug, Serialize, Deserialize)]
struct EquilibriumTripleDto {
    x: String,
    k: BTreeMap<String, String>,
    sigma: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum EquilibriumDto {
    Builtin {
        builtin: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
    },
    Table {
        table: Vec<EquilibriumTripleDto>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct GameDto {
    dom: DomDto,
    cod: CodDto,
    strategies: Vec<String>,
    play: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coutility: Option<BTreeMap<String, BTreeMap<String, BTreeMap<String, String>>>>,
    equilibrium: EquilibriumDto,
}

/// Loads an open game from its JSON description.
///
/// When `coutility` is omitted the coutility carrier must equal the utility
/// carrier and the projection is used (the coutility-free convention).
pub fn load_game<T: Scalar>(text: &str) -> Result<OpenGame<T>> {
    let dto: GameDto = serde_json::from_str(text).map_err(parse_error)?;
    let states: FinSet<T> = parse_finset(&dto.dom.x, "dom.X")?;
    let coutility_carrier: Carrier<T> = dto.dom.s.to_carrier("dom.S")?;
    let moves: FinSet<T> = parse_finset(&dto.cod.y, "cod.Y")?;
    let utility_carrier: Carrier<T> = dto.cod.r.to_carrier("cod.R")?;
    let strategies: FinSet<T> = parse_finset(&dto.strategies, "strategies")?;

    // Play table, validated total.
    let mut play_table: BTreeMap<(Value<T>, Value<T>), Value<T>> = BTreeMap::new();
    for sigma in strategies.iter() {
        let row = dto
            .play
            .get(&sigma.to_string())
            .ok_or_else(|| schema(format!("play missing strategy `{sigma}`")))?;
        for x in states.iter() {
            let y_text = row
                .get(&x.to_string())
                .ok_or_else(|| schema(format!("play missing state `{x}` for `{sigma}`")))?;
            let y = Value::parse(y_text)?;
            if !moves.contains(&y) {
                return Err(schema(format!("play({sigma}, {x}) = `{y}` is not a move")));
            }
            play_table.insert((sigma.clone(), x.clone()), y);
        }
    }
    let play_fn = {
        let table = play_table;
        Arc::new(move |sigma: &Value<T>, x: &Value<T>| {
            table
                .get(&(sigma.clone(), x.clone()))
                .cloned()
                .unwrap_or_else(|| panic!("play not defined at ({sigma}, {x})"))
        })
    };

    // Coutility: explicit table, or the projection convention.
    let coutility_fn: crate::game::CoutilityFn<T> = match &dto.coutility {
        None => {
            if coutility_carrier != utility_carrier {
                return Err(schema(
                    "coutility omitted but S differs from R; the projection convention needs S = R",
                ));
            }
            Arc::new(|_, _, r| r.clone())
        }
        Some(rows) => {
            let finite_r = utility_carrier.as_finite().ok_or_else(|| {
                schema("explicit coutility tables require a finite utility carrier")
            })?;
            let mut table: BTreeMap<(Value<T>, Value<T>, Value<T>), Value<T>> = BTreeMap::new();
            for sigma in strategies.iter() {
                let by_state = rows
                    .get(&sigma.to_string())
                    .ok_or_else(|| schema(format!("coutility missing strategy `{sigma}`")))?;
                for x in states.iter() {
                    let by_r = by_state.get(&x.to_string()).ok_or_else(|| {
                        schema(format!("coutility missing state `{x}` for `{sigma}`"))
                    })?;
                    for r in finite_r.iter() {
                        let s_text = by_r.get(&r.to_string()).ok_or_else(|| {
                            schema(format!("coutility missing utility `{r}` at ({sigma}, {x})"))
                        })?;
                        let s = Value::parse(s_text)?;
                        if !coutility_carrier.contains(&s) {
                            return Err(schema(format!(
                                "coutility({sigma}, {x}, {r}) = `{s}` is outside S"
                            )));
                        }
                        table.insert((sigma.clone(), x.clone(), r.clone()), s);
                    }
                }
            }
            Arc::new(move |sigma: &Value<T>, x: &Value<T>, r: &Value<T>| {
                table
                    .get(&(sigma.clone(), x.clone(), r.clone()))
                    .cloned()
                    .unwrap_or_else(|| panic!("coutility not defined at ({sigma}, {x}, {r})"))
            })
        }
    };

    let mut affine = false;
    let mut builtin_desc = None;
    let equilibrium_fn: EquilibriumFn<T> = match &dto.equilibrium {
        EquilibriumDto::Builtin { builtin, epsilon } => {
            let eps = T::from_f64_lossy(epsilon.unwrap_or(DEFAULT_EPSILON));
            builtin_desc = Some((builtin.clone(), eps));
            match builtin.as_str() {
                "always" => Arc::new(|_, _, _| true),
                "never" => Arc::new(|_, _, _| false),
                "argmax" => {
                    affine = true;
                    let moves = moves.clone();
                    let play = Arc::clone(&play_fn);
                    Arc::new(move |x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
                        let own = scalar(k.get(&play(sigma, x)));
                        moves.iter().all(|y| own >= scalar(k.get(y)) - eps)
                    })
                }
                "nash" => {
                    affine = true;
                    let (rows, cols) = split_profile_moves(&moves)?;
                    let play = Arc::clone(&play_fn);
                    Arc::new(move |x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
                        let profile = play(sigma, x);
                        let (a, b) = profile.expect_pair();
                        let own = k.get(&profile).as_num().expect("numeric pair utility");
                        rows.iter().all(|alt| {
                            let v = k.get(&Value::pair(alt.clone(), b.clone()));
                            own[0] >= v.as_num().expect("numeric")[0] - eps
                        }) && cols.iter().all(|alt| {
                            let v = k.get(&Value::pair(a.clone(), alt.clone()));
                            own[1] >= v.as_num().expect("numeric")[1] - eps
                        })
                    })
                }
                other => {
                    return Err(schema(format!(
                        "unknown builtin equilibrium `{other}` (expected always, never, argmax, nash)"
                    )))
                }
            }
        }
        EquilibriumDto::Table { table } => {
            let mut members = std::collections::BTreeSet::new();
            for triple in table {
                let x = Value::parse(&triple.x)?;
                let sigma = Value::parse(&triple.sigma)?;
                let entries = triple
                    .k
                    .iter()
                    .map(|(y, r)| Ok((Value::parse(y)?, Value::parse(r)?)))
                    .collect::<Result<Vec<_>>>()?;
                let k = Continuation::new(&moves, entries)
                    .map_err(|e| schema(format!("equilibrium triple continuation: {e}")))?;
                members.insert((x, k.canonical(), sigma));
            }
            Arc::new(move |x: &Value<T>, k: &Continuation<T>, sigma: &Value<T>| {
                members.contains(&(x.clone(), k.canonical(), sigma.clone()))
            })
        }
    };

    let mut game = OpenGame::new(
        states,
        coutility_carrier,
        moves,
        utility_carrier,
        strategies,
        play_fn,
        coutility_fn,
        equilibrium_fn,
    )
    .with_affine_invariance(affine);
    if let Some((name, eps)) = builtin_desc {
        game = game.with_builtin_equilibrium(name, eps);
    }
    Ok(game)
}

fn scalar<T: Scalar>(v: &Value<T>) -> T {
    match v.as_num() {
        Some(n) if n.len() == 1 => n[0],
        _ => panic!("expected a 1-dimensional numeric utility, found `{v}`"),
    }
}

/// Splits a move set of pairs into row and column move sets, requiring the
/// full product.
fn split_profile_moves<T: Scalar>(moves: &FinSet<T>) -> Result<(FinSet<T>, FinSet<T>)> {
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    for m in moves.iter() {
        let (a, b) = m
            .as_pair()
            .ok_or_else(|| schema(format!("profile move `{m}` is not a pair")))?;
        if !rows.contains(a) {
            rows.push(a.clone());
        }
        if !cols.contains(b) {
            cols.push(b.clone());
        }
    }
    let rows = FinSet::new(rows).expect("deduplicated");
    let cols = FinSet::new(cols).expect("deduplicated");
    if rows.len() * cols.len() != moves.len() {
        return Err(schema("profile move set is not a full product"));
    }
    Ok((rows, cols))
}

/// Serializes a game. The equilibrium is written as its builtin name when
/// the game carries one, otherwise materialized into an explicit table
/// (finite utility carrier required, guarded).
pub fn save_game<T: Scalar>(game: &OpenGame<T>) -> Result<serde_json::Value> {
    let states = game.states();
    let moves = game.moves();

    let mut play = BTreeMap::new();
    for sigma in game.strategies().iter() {
        let mut row = BTreeMap::new();
        for x in states.iter() {
            row.insert(x.to_string(), game.play(sigma, x).to_string());
        }
        play.insert(sigma.to_string(), row);
    }

    let coutility = match game.utility_carrier().as_finite() {
        Some(finite_r) => {
            let mut rows = BTreeMap::new();
            for sigma in game.strategies().iter() {
                let mut by_state = BTreeMap::new();
                for x in states.iter() {
                    let mut by_r = BTreeMap::new();
                    for r in finite_r.iter() {
                        by_r.insert(r.to_string(), game.coutility(sigma, x, r).to_string());
                    }
                    by_state.insert(x.to_string(), by_r);
                }
                rows.insert(sigma.to_string(), by_state);
            }
            Some(rows)
        }
        None => None,
    };

    let equilibrium = match game.builtin_equilibrium() {
        Some((name, eps)) => EquilibriumDto::Builtin {
            builtin: name.to_string(),
            epsilon: Some(eps.to_f64_lossy()),
        },
        None => {
            let finite_r = game.utility_carrier().as_finite().ok_or_else(|| {
                Error::InvalidParameter {
                    what: "game serialization",
                    message: "cannot materialize an equilibrium table over a numeric carrier"
                        .into(),
                }
            })?;
            let k_space = FinSet::tables(moves, finite_r, SERIALIZATION_GUARD)?;
            let size = states.len() * k_space.len() * game.strategies().len();
            if size > SERIALIZATION_GUARD {
                return Err(Error::EnumerationTooLarge {
                    size: size as u128,
                    guard: SERIALIZATION_GUARD,
                });
            }
            let mut table = Vec::new();
            for x in states.iter() {
                for k_val in &k_space {
                    let k = Continuation::from_fn(moves, |y| {
                        k_val.table_get(y).expect("total table").clone()
                    });
                    for sigma in game.strategies().iter() {
                        if game.is_equilibrium(x, &k, sigma) {
                            table.push(EquilibriumTripleDto {
                                x: x.to_string(),
                                k: k.iter()
                                    .map(|(y, r)| (y.to_string(), r.to_string()))
                                    .collect(),
                                sigma: sigma.to_string(),
                            });
                        }
                    }
                }
            }
            EquilibriumDto::Table { table }
        }
    };

    let dto = GameDto {
        dom: DomDto {
            x: states.iter().map(|v| v.to_string()).collect(),
            s: CarrierDto::from_carrier(game.coutility_carrier()),
        },
        cod: CodDto {
            y: moves.iter().map(|v| v.to_string()).collect(),
            r: CarrierDto::from_carrier(game.utility_carrier()),
        },
        strategies: game.strategies().iter().map(|v| v.to_string()).collect(),
        play,
        coutility,
        equilibrium,
    };
    serde_json::to_value(&dto).map_err(parse_error)
}

// ---------------------------------------------------------------------------
// Morphisms
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct MorphismDto {
    #[serde(rename = "alpha_Y")]
    alpha_y: BTreeMap<String, String>,
    #[serde(rename = "alpha_Sigma")]
    alpha_sigma: BTreeMap<String, String>,
}

pub fn load_morphism<T: Scalar>(text: &str) -> Result<GameMorphism<T>> {
    let dto: MorphismDto = serde_json::from_str(text).map_err(parse_error)?;
    let parse_map = |m: &BTreeMap<String, String>| -> Result<BTreeMap<Value<T>, Value<T>>> {
        m.iter()
            .map(|(k, v)| Ok((Value::parse(k)?, Value::parse(v)?)))
            .collect()
    };
    Ok(GameMorphism::new(
        parse_map(&dto.alpha_y)?,
        parse_map(&dto.alpha_sigma)?,
    ))
}

pub fn save_morphism<T: Scalar>(alpha: &GameMorphism<T>) -> Result<serde_json::Value> {
    let render = |m: &BTreeMap<Value<T>, Value<T>>| -> BTreeMap<String, String> {
        m.iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    };
    serde_json::to_value(&MorphismDto {
        alpha_y: render(&alpha.alpha_moves),
        alpha_sigma: render(&alpha.alpha_strategies),
    })
    .map_err(parse_error)
}

// ---------------------------------------------------------------------------
// Bimatrices and utilities
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct BimatrixDto {
    moves1: Vec<String>,
    moves2: Vec<String>,
    payoff: BTreeMap<String, [f64; 2]>,
}

pub fn load_bimatrix<T: Scalar>(text: &str) -> Result<Bimatrix<T>> {
    let dto: BimatrixDto = serde_json::from_str(text).map_err(parse_error)?;
    let moves1 = parse_finset(&dto.moves1, "moves1")?;
    let moves2 = parse_finset(&dto.moves2, "moves2")?;
    let mut payoff = BTreeMap::new();
    for (key, cell) in &dto.payoff {
        payoff.insert(
            Value::parse(key)?,
            [T::from_f64_lossy(cell[0]), T::from_f64_lossy(cell[1])],
        );
    }
    Bimatrix::new(moves1, moves2, payoff)
}

pub fn save_bimatrix<T: Scalar>(m: &Bimatrix<T>) -> Result<serde_json::Value> {
    serde_json::to_value(&BimatrixDto {
        moves1: m.moves1().iter().map(|v| v.to_string()).collect(),
        moves2: m.moves2().iter().map(|v| v.to_string()).collect(),
        payoff: m
            .payoff()
            .iter()
            .map(|(k, v)| (k.to_string(), [v[0].to_f64_lossy(), v[1].to_f64_lossy()]))
            .collect(),
    })
    .map_err(parse_error)
}

/// Whether a JSON document looks like a bimatrix description.
pub fn looks_like_bimatrix(text: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(text)
        .map(|v| v.get("moves1").is_some() && v.get("payoff").is_some())
        .unwrap_or(false)
}

#[derive(Debug, Serialize, Deserialize)]
struct UtilityDto {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    stage_payoff: BTreeMap<String, Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    offset: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
}

pub fn load_utility<T: Scalar>(text: &str) -> Result<crate::utility::UtilityFunctional<T>> {
    let dto: UtilityDto = serde_json::from_str(text).map_err(parse_error)?;
    let mut payoff = BTreeMap::new();
    for (key, cell) in &dto.stage_payoff {
        payoff.insert(
            Value::parse(key)?,
            cell.iter().map(|&c| T::from_f64_lossy(c)).collect::<Vec<_>>(),
        );
    }
    let base = match dto.kind.as_str() {
        "discounted" => {
            let delta = dto
                .delta
                .ok_or_else(|| schema("discounted utility requires `delta`"))?;
            crate::utility::UtilityFunctional::discounted(payoff, T::from_f64_lossy(delta))?
        }
        "finite_horizon" => {
            let horizon = dto
                .horizon
                .ok_or_else(|| schema("finite_horizon utility requires `horizon`"))?;
            crate::utility::UtilityFunctional::finite_horizon(payoff, horizon)?
        }
        "mean_payoff_approx" | "mean_payoff" => {
            let window = dto
                .window
                .or(dto.horizon)
                .ok_or_else(|| schema("mean_payoff utility requires `window`"))?;
            crate::utility::UtilityFunctional::mean_payoff(payoff, window)?
        }
        other => return Err(schema(format!("unknown utility kind `{other}`"))),
    };
    match (&dto.offset, dto.scale) {
        (None, None) => Ok(base),
        (offset, scale) => {
            let players = base.players();
            let offset = offset
                .clone()
                .unwrap_or_else(|| vec![0.0; players])
                .into_iter()
                .map(T::from_f64_lossy)
                .collect();
            base.with_affine(offset, T::from_f64_lossy(scale.unwrap_or(1.0)))
        }
    }
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum StrategyDto {
    Builtin {
        builtin: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        stage: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        cooperate: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        punish: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        defect: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        trigger: Option<Vec<String>>,
    },
    Machine {
        states: Vec<String>,
        initial: String,
        stage: BTreeMap<String, String>,
        step: BTreeMap<String, BTreeMap<String, String>>,
    },
    Table {
        depth: usize,
        entries: BTreeMap<String, String>,
        default: String,
    },
}

/// Loads a strategy (transducer, depth table, or builtin reference) against
/// a stage game.
pub fn load_strategy<T: Scalar>(
    text: &str,
    stage: &CoutilityFreeGame<T>,
) -> Result<IterStrategy<T>> {
    let dto: StrategyDto = serde_json::from_str(text).map_err(parse_error)?;
    match dto {
        StrategyDto::Machine {
            states,
            initial,
            stage: stage_map,
            step,
        } => {
            let states = parse_finset(&states, "states")?;
            let initial = Value::parse(&initial)?;
            let stage_map = stage_map
                .iter()
                .map(|(k, v)| Ok((Value::parse(k)?, Value::parse(v)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            let step = step
                .iter()
                .map(|(q, row)| {
                    let row = row
                        .iter()
                        .map(|(y, next)| Ok((Value::parse(y)?, Value::parse(next)?)))
                        .collect::<Result<BTreeMap<_, _>>>()?;
                    Ok((Value::parse(q)?, row))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            Ok(IterStrategy::Machine(StrategyTransducer::new(
                states,
                initial,
                stage_map,
                step,
                stage.moves().clone(),
                stage.strategies(),
            )?))
        }
        StrategyDto::Table {
            depth,
            entries,
            default,
        } => {
            let mut table = BTreeMap::new();
            for (history, s) in &entries {
                let history = if history.is_empty() {
                    Vec::new()
                } else {
                    history
                        .split('|')
                        .map(Value::parse)
                        .collect::<Result<Vec<_>>>()?
                };
                table.insert(history, Value::parse(s)?);
            }
            Ok(IterStrategy::Table(DepthTable::new(
                depth,
                table,
                Value::parse(&default)?,
                stage.moves().clone(),
            )?))
        }
        StrategyDto::Builtin {
            builtin,
            stage: stage_strategy,
            cooperate,
            punish,
            defect,
            trigger,
        } => {
            let b = builtins(stage);
            let machine = match builtin.as_str() {
                "all_constant" => {
                    let s = stage_strategy
                        .ok_or_else(|| schema("all_constant requires `stage`"))?;
                    b.all_constant(&Value::parse(&s)?)?
                }
                "grim_trigger" => match (cooperate, punish, trigger) {
                    (None, None, None) => b.grim_trigger_pd()?,
                    (Some(c), Some(p), Some(tr)) => {
                        let trigger = tr
                            .iter()
                            .map(|t| Value::parse(t))
                            .collect::<Result<Vec<_>>>()?;
                        b.grim_trigger(&Value::parse(&c)?, &Value::parse(&p)?, &trigger)?
                    }
                    _ => {
                        return Err(schema(
                            "grim_trigger takes either no parameters or all of cooperate/punish/trigger",
                        ))
                    }
                },
                "tit_for_tat" => {
                    let c = cooperate.unwrap_or_else(|| "C".to_string());
                    let d = defect.unwrap_or_else(|| "D".to_string());
                    b.tit_for_tat(&Value::parse(&c)?, &Value::parse(&d)?)?
                }
                other => return Err(schema(format!("unknown builtin strategy `{other}`"))),
            };
            Ok(IterStrategy::Machine(machine))
        }
    }
}

pub fn save_strategy<T: Scalar>(strategy: &IterStrategy<T>) -> Result<serde_json::Value> {
    match strategy {
        IterStrategy::Machine(m) => {
            let mut stage = BTreeMap::new();
            let mut step = BTreeMap::new();
            for q in m.states().iter() {
                stage.insert(q.to_string(), m.stage_of(q).to_string());
                let mut row = BTreeMap::new();
                for y in m.moves().iter() {
                    row.insert(y.to_string(), m.step_of(q, y)?.to_string());
                }
                step.insert(q.to_string(), row);
            }
            serde_json::to_value(&StrategyDto::Machine {
                states: m.states().iter().map(|v| v.to_string()).collect(),
                initial: m.initial().to_string(),
                stage,
                step,
            })
            .map_err(parse_error)
        }
        IterStrategy::Table(t) => {
            let entries = t
                .entries()
                .map(|(history, s)| {
                    (
                        history
                            .iter()
                            .map(|y| y.to_string())
                            .collect::<Vec<_>>()
                            .join("|"),
                        s.to_string(),
                    )
                })
                .collect();
            serde_json::to_value(&StrategyDto::Table {
                depth: t.depth(),
                entries,
                default: t.default_stage().to_string(),
            })
            .map_err(parse_error)
        }
    }
}

// ---------------------------------------------------------------------------
// Coalgebras
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CoalgebraDto {
    stage: serde_json::Value,
    machine: serde_json::Value,
    #[serde(default)]
    equilibrium: Option<CoalgebraEquilibriumDto>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind")]
enum CoalgebraEquilibriumDto {
    #[serde(rename = "empty")]
    Empty,
    #[serde(rename = "exact")]
    Exact {
        delta: f64,
        #[serde(default)]
        epsilon: Option<f64>,
    },
}

/// Loads a machine-derived coalgebra: a stage game (bimatrix or game file),
/// a transducer over it, and the equilibrium predicate to attach.
pub fn load_coalgebra<T: Scalar>(
    text: &str,
    epsilon: T,
) -> Result<(CoutilityFreeGame<T>, FiniteCoalgebra<T>)> {
    let dto: CoalgebraDto = serde_json::from_str(text).map_err(parse_error)?;
    let stage_text = dto.stage.to_string();
    let (stage, bimatrix) = load_stage_game::<T>(&stage_text, epsilon)?;
    let strategy = load_strategy(&dto.machine.to_string(), &stage)?;
    let IterStrategy::Machine(machine) = strategy else {
        return Err(schema("coalgebra machines must be transducers"));
    };
    let equilibrium = match dto.equilibrium {
        None | Some(CoalgebraEquilibriumDto::Empty) => CoalgebraEquilibrium::Empty,
        Some(CoalgebraEquilibriumDto::Exact { delta, epsilon: e }) => {
            let m = bimatrix.ok_or_else(|| {
                schema("exact coalgebra equilibria require a bimatrix stage game")
            })?;
            CoalgebraEquilibrium::ExactSubgamePerfect {
                utility: m.utility(T::from_f64_lossy(delta))?,
                epsilon: T::from_f64_lossy(e.unwrap_or(DEFAULT_EPSILON)),
            }
        }
    };
    let coalgebra = FiniteCoalgebra::from_transducer(&stage, &machine, equilibrium)?;
    Ok((stage, coalgebra))
}

/// Loads a stage game from either a bimatrix file or a full game file.
pub fn load_stage_game<T: Scalar>(
    text: &str,
    epsilon: T,
) -> Result<(CoutilityFreeGame<T>, Option<Bimatrix<T>>)> {
    if looks_like_bimatrix(text) {
        let m = load_bimatrix::<T>(text)?;
        Ok((m.to_game(epsilon)?, Some(m)))
    } else {
        let game = load_game::<T>(text)?;
        Ok((CoutilityFreeGame::try_new(game)?, None))
    }
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

pub fn verdict_to_json<T: Scalar>(verdict: &Verdict<T>) -> serde_json::Value {
    use crate::iteration::{DepthChecked, Warning};
    let witness = verdict.witness.as_ref().map(|w| {
        serde_json::json!({
            "history": w.history.iter().map(|y| y.to_string()).collect::<Vec<_>>(),
            "deviation": w.deviation.as_ref().map(|d| d.to_string()),
        })
    });
    let depth = match verdict.depth_checked {
        DepthChecked::Bounded(d) => serde_json::json!(d),
        DepthChecked::Exhaustive => serde_json::json!("exact"),
    };
    let warnings: Vec<serde_json::Value> = verdict
        .warnings
        .iter()
        .map(|w| match w {
            Warning::ApproximateUtility { tail_bound } => serde_json::json!({
                "kind": "approximate_utility",
                "tail_bound": tail_bound.to_f64_lossy(),
            }),
            Warning::NumericallyMarginal { margin } => serde_json::json!({
                "kind": "numerically_marginal",
                "margin": margin.to_f64_lossy(),
            }),
        })
        .collect();
    serde_json::json!({
        "status": verdict.status.to_string(),
        "witness": witness,
        "depth_checked": depth,
        "tolerance": verdict.tolerance.to_f64_lossy(),
        "warnings": warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compare::{games_equal_up_to, GameIso, DEFAULT_COMPARISON_GUARD};

    #[test]
    fn bimatrix_round_trip() {
        let pd = Bimatrix::<f64>::prisoners_dilemma();
        let text = save_bimatrix(&pd).unwrap().to_string();
        let back = load_bimatrix::<f64>(&text).unwrap();
        assert_eq!(back.payoff(), pd.payoff());
        assert!(looks_like_bimatrix(&text));
    }

    #[test]
    fn game_round_trip_is_extensional_identity() {
        // A small symbolic game with an explicit equilibrium table.
        let text = r#"{
            "dom": {"X": ["x0"], "S": ["s0", "s1"]},
            "cod": {"Y": ["y0", "y1"], "R": ["r0", "r1"]},
            "strategies": ["a", "b"],
            "play": {"a": {"x0": "y0"}, "b": {"x0": "y1"}},
            "coutility": {
                "a": {"x0": {"r0": "s0", "r1": "s1"}},
                "b": {"x0": {"r0": "s1", "r1": "s0"}}
            },
            "equilibrium": {"table": [
                {"x": "x0", "k": {"y0": "r0", "y1": "r0"}, "sigma": "a"},
                {"x": "x0", "k": {"y0": "r1", "y1": "r0"}, "sigma": "b"}
            ]}
        }"#;
        let game = load_game::<f64>(text).unwrap();
        let saved = save_game(&game).unwrap().to_string();
        let back = load_game::<f64>(&saved).unwrap();
        let report =
            games_equal_up_to(&game, &back, &GameIso::identity(), DEFAULT_COMPARISON_GUARD)
                .unwrap();
        assert_eq!(report, None);
    }

    #[test]
    fn builtin_equilibrium_survives_round_trip() {
        let text = r#"{
            "dom": {"X": ["()"], "S": {"num_dim": 1}},
            "cod": {"Y": ["m1", "m2"], "R": {"num_dim": 1}},
            "strategies": ["m1", "m2"],
            "play": {"m1": {"()": "m1"}, "m2": {"()": "m2"}},
            "equilibrium": {"builtin": "argmax"}
        }"#;
        let game = load_game::<f64>(text).unwrap();
        assert!(game.affine_invariant());
        let saved = save_game(&game).unwrap();
        assert_eq!(saved["equilibrium"]["builtin"], "argmax");
        let back = load_game::<f64>(&saved.to_string()).unwrap();
        let k = Continuation::new(
            back.moves(),
            [
                (Value::sym("m1"), Value::scalar(1.0)),
                (Value::sym("m2"), Value::scalar(5.0)),
            ],
        )
        .unwrap();
        assert_eq!(
            back.equilibrium_set(&Value::Unit, &k).unwrap(),
            vec![Value::sym("m2")]
        );
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = load_game::<f64>("{ not json").unwrap_err();
        assert_eq!(err.kind(), "parse_error");
        assert!(err.to_string().contains("line"));
    }

    #[test]
    fn schema_violations_are_schema_errors() {
        let text = r#"{
            "dom": {"X": ["x0"], "S": ["s0"]},
            "cod": {"Y": ["y0"], "R": ["r0"]},
            "strategies": ["a"],
            "play": {"a": {}},
            "equilibrium": {"builtin": "always"}
        }"#;
        let err = load_game::<f64>(text).unwrap_err();
        assert_eq!(err.kind(), "schema_error");
    }

    #[test]
    fn strategy_builtins_load() {
        let pd = Bimatrix::<f64>::prisoners_dilemma();
        let stage = pd.to_game(1e-9).unwrap();
        let grim = load_strategy::<f64>(r#"{"builtin": "grim_trigger"}"#, &stage).unwrap();
        let IterStrategy::Machine(m) = &grim else {
            panic!("expected machine")
        };
        assert_eq!(m.states().len(), 2);
        let text = save_strategy(&grim).unwrap().to_string();
        let back = load_strategy::<f64>(&text, &stage).unwrap();
        assert_eq!(back, grim);
    }

    #[test]
    fn utility_json_round_trip_semantics() {
        let text = r#"{
            "kind": "discounted",
            "delta": 0.9,
            "stage_payoff": {"C,C": [3,3], "C,D": [0,5], "D,C": [5,0], "D,D": [1,1]}
        }"#;
        let k = load_utility::<f64>(text).unwrap();
        assert_eq!(k.discount(), 0.9);
        assert_eq!(
            k.payoff_of(&Value::pair(Value::sym("C"), Value::sym("D")))
                .unwrap(),
            &vec![0.0, 5.0]
        );
    }
}
