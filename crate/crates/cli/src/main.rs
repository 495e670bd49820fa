//! Command-line entry point: load games, strategies, and utility functionals
//! from JSON files, run one analysis per invocation, and emit a
//! machine-readable report plus a plain-text summary.
//!
//! Exit codes: 0 the analysis ran (whatever its verdict), 1 input or
//! validation error, 2 internal error. Reports are byte-identical across
//! runs except for the volatile `meta` block (timestamp, elapsed time).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use open_games::game::{compose, tensor, Continuation};
use open_games::iteration::{bisim_check, BisimOutcome, IterStrategy};
use open_games::json;
use open_games::two_cells::{
    check_morphism, check_morphism_sampled, CheckMode, MorphismCheck, MorphismWitness,
};
use open_games::{Carrier64, Error, FinSet64, IteratedGame, Value, Value64};

#[derive(Parser)]
#[command(
    name = "open-games",
    about = "Analyses over finite open games: one-shot equilibria, composition, conditioning, morphism checking, and iterated-game membership",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Comparison tolerance for numeric equilibria.
    #[arg(long, global = true, default_value_t = 1e-9)]
    epsilon: f64,

    /// Depth for bounded checks, unfoldings, and bisimulation.
    #[arg(long, global = true, default_value_t = 12)]
    depth: usize,

    /// Discount factor for iterated-game utilities.
    #[arg(long, global = true)]
    delta: Option<f64>,

    /// exact: decide membership; bounded: unroll to --depth.
    #[arg(long, global = true, default_value = "exact")]
    mode: String,

    /// Worker threads for partitionable enumerations (default 1 keeps
    /// timings reproducible).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the JSON report here (it is also embedded in stdout mode).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Pure equilibria of a one-shot bimatrix game against its own payoffs.
    CheckNash { game: PathBuf },
    /// Sequential composition of two games; emits the composed game.
    Compose { first: PathBuf, second: PathBuf },
    /// Parallel composition of two games; emits the composed game.
    Tensor { first: PathBuf, second: PathBuf },
    /// Condition a game on an index set; emits the conditioned game.
    Condition {
        game: PathBuf,
        /// Comma-separated index labels.
        #[arg(long)]
        labels: String,
    },
    /// Check the two morphism conditions between two games.
    CheckMorphism {
        morphism: PathBuf,
        source: PathBuf,
        target: PathBuf,
        /// Continuation sample size in bounded mode.
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Equilibrium membership of a repeated-game strategy.
    IterateCheck {
        stage: PathBuf,
        strategy: PathBuf,
        /// Utility functional file; defaults to the discounted utility of a
        /// bimatrix stage (--delta required then).
        #[arg(long)]
        utility: Option<PathBuf>,
    },
    /// Unfold a finite coalgebra into strategy tables and move streams.
    Unfold { coalgebra: PathBuf },
    /// Compare two move-stream generators up to a depth.
    Bisim { first: PathBuf, second: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    if cli.common.threads > 1 {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.common.threads)
            .build_global();
    }
    let started = Instant::now();
    let common = cli.common.clone();
    let outcome = std::panic::catch_unwind(move || run(&cli.command, &cli.common));
    let (code, report) = match outcome {
        Ok(Ok(result)) => (0, result),
        Ok(Err(err)) => (
            1,
            Report {
                command: "error".into(),
                summary: format!("error: {err}"),
                result: serde_json::json!({
                    "error": {"kind": err.kind(), "message": err.to_string()}
                }),
            },
        ),
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            (
                2,
                Report {
                    command: "error".into(),
                    summary: format!("internal error: {message}"),
                    result: serde_json::json!({
                        "error": {"kind": "internal_error", "message": message}
                    }),
                },
            )
        }
    };

    let meta = serde_json::json!({
        "timestamp_ms": SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
        "elapsed_ms": started.elapsed().as_millis() as u64,
    });
    let full = serde_json::json!({
        "command": report.command,
        "ok": code == 0,
        "result": report.result,
        "meta": meta,
    });

    // Ignore pipe closure on the text channel; the exit code is the API.
    let mut stdout = std::io::stdout();
    let _ = writeln!(stdout, "{}", report.summary);
    let code = match &common.output {
        Some(path) => match fs::write(path, serde_json::to_string_pretty(&full).unwrap()) {
            Ok(()) => {
                let _ = writeln!(stdout, "report written to {}", path.display());
                code
            }
            Err(e) => {
                eprintln!("internal error: cannot write report: {e}");
                2
            }
        },
        None => {
            let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&full).unwrap());
            code
        }
    };
    std::process::exit(code);
}

struct Report {
    command: String,
    summary: String,
    result: serde_json::Value,
}

fn read(path: &PathBuf) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Parse {
        message: format!("{}: {e}", path.display()),
    })
}

/// Prefixes parse and schema errors with the file they came from.
fn at_file(path: &Path, err: Error) -> Error {
    match err {
        Error::Parse { message } => Error::Parse {
            message: format!("{}: {message}", path.display()),
        },
        Error::Schema { message } => Error::Schema {
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

fn run(command: &Command, common: &CommonArgs) -> Result<Report, Error> {
    validate_common(common)?;
    match command {
        Command::CheckNash { game } => check_nash(game, common),
        Command::Compose { first, second } => combine(first, second, common, false),
        Command::Tensor { first, second } => combine(first, second, common, true),
        Command::Condition { game, labels } => condition_cmd(game, labels, common),
        Command::CheckMorphism {
            morphism,
            source,
            target,
            samples,
        } => check_morphism_cmd(morphism, source, target, *samples, common),
        Command::IterateCheck {
            stage,
            strategy,
            utility,
        } => iterate_check(stage, strategy, utility.as_ref(), common),
        Command::Unfold { coalgebra } => unfold_cmd(coalgebra, common),
        Command::Bisim { first, second } => bisim_cmd(first, second, common),
    }
}

fn validate_common(common: &CommonArgs) -> Result<(), Error> {
    if !(common.epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            what: "epsilon",
            message: "tolerance must be positive".into(),
        });
    }
    if let Some(delta) = common.delta {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter {
                what: "delta",
                message: format!("discount must satisfy 0 <= delta < 1, got {delta}"),
            });
        }
    }
    match common.mode.as_str() {
        "exact" | "bounded" => Ok(()),
        other => Err(Error::InvalidParameter {
            what: "mode",
            message: format!("unknown mode `{other}` (expected exact or bounded)"),
        }),
    }
}

fn check_nash(game: &PathBuf, common: &CommonArgs) -> Result<Report, Error> {
    let text = read(game)?;
    if let Err(e) = serde_json::from_str::<serde_json::Value>(&text) {
        return Err(at_file(
            game,
            Error::Parse {
                message: format!("line {}, column {}: {e}", e.line(), e.column()),
            },
        ));
    }
    if !json::looks_like_bimatrix(&text) {
        return Err(at_file(
            game,
            Error::Schema {
                message: "check-nash expects a bimatrix file (moves1/moves2/payoff)".into(),
            },
        ));
    }
    let m = json::load_bimatrix::<f64>(&text).map_err(|e| at_file(game, e))?;
    let equilibria = m.pure_equilibria(common.epsilon)?;
    let listed: Vec<String> = equilibria.iter().map(|p| p.to_string()).collect();
    Ok(Report {
        command: "check-nash".into(),
        summary: if listed.is_empty() {
            "pure equilibria: none".into()
        } else {
            format!("pure equilibria: {}", listed.join(", "))
        },
        result: serde_json::json!({
            "equilibria": listed,
            "epsilon": common.epsilon,
        }),
    })
}

fn combine(
    first: &PathBuf,
    second: &PathBuf,
    common: &CommonArgs,
    parallel: bool,
) -> Result<Report, Error> {
    let g = json::load_game::<f64>(&read(first)?)?;
    let h = json::load_game::<f64>(&read(second)?)?;
    let (name, combined) = if parallel {
        ("tensor", tensor(&g, &h))
    } else {
        ("compose", compose(&g, &h)?)
    };
    let game_json = json::save_game(&combined)?;
    let _ = common;
    Ok(Report {
        command: name.into(),
        summary: format!(
            "{name}: ({}, {}) -> ({}, {}), {} strategies",
            combined.states(),
            combined.coutility_carrier(),
            combined.moves(),
            combined.utility_carrier(),
            combined.strategies().len()
        ),
        result: serde_json::json!({ "game": game_json }),
    })
}

fn condition_cmd(game: &PathBuf, labels: &str, common: &CommonArgs) -> Result<Report, Error> {
    let h = json::load_game::<f64>(&read(game)?)?;
    let index = FinSet64::new(
        labels
            .split(',')
            .map(Value64::parse)
            .collect::<Result<Vec<_>, _>>()?,
    )?;
    let conditioned = open_games::conditioning::condition(&index, &h)?;
    let game_json = json::save_game(&conditioned)?;
    let _ = common;
    Ok(Report {
        command: "condition".into(),
        summary: format!(
            "conditioned on {index}: {} strategy tables",
            conditioned.strategies().len()
        ),
        result: serde_json::json!({ "game": game_json }),
    })
}

fn sample_value(rng: &mut ChaCha8Rng, carrier: &Carrier64) -> Value64 {
    match carrier {
        Carrier64::Finite(set) => set.get(rng.gen_range(0..set.len())).unwrap().clone(),
        Carrier64::Numeric { dim } => {
            Value::num((0..*dim).map(|_| rng.gen_range(-10.0..10.0)).collect::<Vec<_>>())
        }
        Carrier64::Product(a, b) => Value::pair(sample_value(rng, a), sample_value(rng, b)),
    }
}

fn check_morphism_cmd(
    morphism: &PathBuf,
    source: &PathBuf,
    target: &PathBuf,
    samples: usize,
    common: &CommonArgs,
) -> Result<Report, Error> {
    let alpha = json::load_morphism::<f64>(&read(morphism)?)?;
    let g = json::load_game::<f64>(&read(source)?)?;
    let g2 = json::load_game::<f64>(&read(target)?)?;

    let outcome = match common.mode.as_str() {
        "exact" => check_morphism(&alpha, &g, &g2)?,
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let ks: Vec<Continuation<f64>> = (0..samples)
                .map(|_| {
                    let cells: BTreeMap<Value64, Value64> = g2
                        .moves()
                        .iter()
                        .map(|y| (y.clone(), sample_value(&mut rng, g2.utility_carrier())))
                        .collect();
                    Continuation::from_fn(g2.moves(), |y| cells[y].clone())
                })
                .collect();
            check_morphism_sampled(&alpha, &g, &g2, &ks)?
        }
    };

    let (passed, mode, witness) = match &outcome {
        MorphismCheck::Pass { mode } => (true, mode, serde_json::Value::Null),
        MorphismCheck::Fail { mode, witness } => (
            false,
            mode,
            match witness {
                MorphismWitness::Play { state, strategy } => serde_json::json!({
                    "condition": "play",
                    "state": state.to_string(),
                    "strategy": strategy.to_string(),
                }),
                MorphismWitness::Equilibrium {
                    state,
                    strategy,
                    continuation,
                } => serde_json::json!({
                    "condition": "equilibrium",
                    "state": state.to_string(),
                    "strategy": strategy.to_string(),
                    "continuation": continuation
                        .iter()
                        .map(|(y, r)| (y.to_string(), r.to_string()))
                        .collect::<BTreeMap<_, _>>(),
                }),
            },
        ),
    };
    let mode_name = match mode {
        CheckMode::Exhaustive => "exhaustive",
        CheckMode::Sampled => "sampled",
    };
    Ok(Report {
        command: "check-morphism".into(),
        summary: format!(
            "morphism check ({mode_name}): {}",
            if passed { "pass" } else { "fail" }
        ),
        result: serde_json::json!({
            "passed": passed,
            "mode": mode_name,
            "witness": witness,
        }),
    })
}

fn iterate_check(
    stage_path: &PathBuf,
    strategy_path: &PathBuf,
    utility_path: Option<&PathBuf>,
    common: &CommonArgs,
) -> Result<Report, Error> {
    let (stage, bimatrix) = json::load_stage_game::<f64>(&read(stage_path)?, common.epsilon)?;
    let utility = match utility_path {
        Some(path) => json::load_utility::<f64>(&read(path)?)?,
        None => {
            let m = bimatrix.ok_or_else(|| Error::Schema {
                message: "non-bimatrix stage games need --utility".into(),
            })?;
            let delta = common.delta.ok_or_else(|| Error::InvalidParameter {
                what: "delta",
                message: "--delta is required when deriving a discounted utility".into(),
            })?;
            m.utility(delta)?
        }
    };
    let strategy = json::load_strategy::<f64>(&read(strategy_path)?, &stage)?;
    let iterated = IteratedGame::new(stage)?;

    let verdict = match common.mode.as_str() {
        "exact" => {
            let machine = match &strategy {
                IterStrategy::Machine(m) => m.clone(),
                IterStrategy::Table(t) => t.to_transducer(iterated.stage().strategies())?,
            };
            iterated.check_exact(&machine, &utility, common.epsilon)?
        }
        _ => iterated.check_bounded(&strategy, &utility, common.depth, common.epsilon)?,
    };

    Ok(Report {
        command: "iterate-check".into(),
        summary: format!("membership: {verdict}"),
        result: serde_json::json!({ "verdict": json::verdict_to_json(&verdict) }),
    })
}

fn unfold_cmd(coalgebra: &PathBuf, common: &CommonArgs) -> Result<Report, Error> {
    let (_stage, c) = json::load_coalgebra::<f64>(&read(coalgebra)?, common.epsilon)?;
    let (tables, streams) = c.unfold(common.depth)?;
    let tables_json: BTreeMap<String, serde_json::Value> = tables
        .iter()
        .map(|(sigma, table)| {
            let entries: BTreeMap<String, String> = table
                .entries()
                .map(|(h, s)| {
                    (
                        h.iter().map(|y| y.to_string()).collect::<Vec<_>>().join("|"),
                        s.to_string(),
                    )
                })
                .collect();
            (
                sigma.to_string(),
                serde_json::json!({
                    "depth": table.depth(),
                    "entries": entries,
                    "default": table.default_stage().to_string(),
                }),
            )
        })
        .collect();
    let streams_json: BTreeMap<String, Vec<String>> = streams
        .iter()
        .map(|(z, prefix)| {
            (
                z.to_string(),
                prefix.iter().map(|y| y.to_string()).collect(),
            )
        })
        .collect();
    Ok(Report {
        command: "unfold".into(),
        summary: format!(
            "unfolded {} strategies and {} streams to depth {}",
            tables.len(),
            streams.len(),
            common.depth
        ),
        result: serde_json::json!({
            "strategies": tables_json,
            "streams": streams_json,
        }),
    })
}

fn bisim_cmd(first: &PathBuf, second: &PathBuf, common: &CommonArgs) -> Result<Report, Error> {
    let a = load_generator(first, common)?;
    let b = load_generator(second, common)?;
    let outcome = bisim_check(a, b, common.depth);
    let (summary, result) = match outcome {
        BisimOutcome::EqualToDepth(d) => (
            format!("streams equal to depth {d}"),
            serde_json::json!({"equal_to_depth": d}),
        ),
        BisimOutcome::DisagreeAt { index } => (
            format!("streams disagree at index {index}"),
            serde_json::json!({"disagree_at": index}),
        ),
    };
    Ok(Report {
        command: "bisim".into(),
        summary,
        result,
    })
}

/// A stream generator file: either an explicit move list
/// (`{"moves": [...]}`), or a stage game plus strategy whose self-play
/// stream is generated (`{"stage": ..., "strategy": ...}`).
fn load_generator(
    path: &PathBuf,
    common: &CommonArgs,
) -> Result<Box<dyn Iterator<Item = Value64>>, Error> {
    let text = read(path)?;
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        message: format!("{}: {e}", path.display()),
    })?;
    if let Some(moves) = raw.get("moves") {
        let moves = moves
            .as_array()
            .ok_or_else(|| Error::Schema {
                message: "`moves` must be an array".into(),
            })?
            .iter()
            .map(|m| {
                m.as_str()
                    .ok_or_else(|| Error::Schema {
                        message: "moves must be strings".into(),
                    })
                    .and_then(Value64::parse)
            })
            .collect::<Result<Vec<_>, _>>()?;
        if moves.len() < common.depth {
            return Err(Error::InvalidParameter {
                what: "depth",
                message: format!(
                    "explicit generator has {} moves but depth is {}",
                    moves.len(),
                    common.depth
                ),
            });
        }
        return Ok(Box::new(moves.into_iter()));
    }
    let stage_field = raw.get("stage").ok_or_else(|| Error::Schema {
        message: "generator needs `moves` or `stage` + `strategy`".into(),
    })?;
    let strategy_field = raw.get("strategy").ok_or_else(|| Error::Schema {
        message: "generator needs `moves` or `stage` + `strategy`".into(),
    })?;
    let (stage, _) = json::load_stage_game::<f64>(&stage_field.to_string(), common.epsilon)?;
    let strategy = json::load_strategy::<f64>(&strategy_field.to_string(), &stage)?;
    let iterated = IteratedGame::new(stage)?;
    let iter = iterated.self_play_iter(&strategy)?;
    Ok(Box::new(iter))
}
