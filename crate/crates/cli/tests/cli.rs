//! End-to-end tests of the command-line interface: exit-code policy, report
//! determinism, and one smoke run per subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_open-games"))
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

fn pd_json() -> &'static str {
    r#"{
        "moves1": ["C", "D"],
        "moves2": ["C", "D"],
        "payoff": {"C,C": [3,3], "C,D": [0,5], "D,C": [5,0], "D,D": [1,1]}
    }"#
}

fn small_game_json() -> &'static str {
    r#"{
        "dom": {"X": ["x0"], "S": ["s0"]},
        "cod": {"Y": ["y0", "y1"], "R": ["r0"]},
        "strategies": ["a", "b"],
        "play": {"a": {"x0": "y0"}, "b": {"x0": "y1"}},
        "coutility": {
            "a": {"x0": {"r0": "s0"}},
            "b": {"x0": {"r0": "s0"}}
        },
        "equilibrium": {"builtin": "always"}
    }"#
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn check_nash_lists_defection() {
    let dir = tempfile::tempdir().unwrap();
    let pd = write(dir.path(), "pd.json", pd_json());
    let out = bin().arg("check-nash").arg(&pd).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    assert!(stdout_of(&out).contains("D,D"));
}

#[test]
fn iterate_check_exact_holds_for_grim_at_high_discount() {
    let dir = tempfile::tempdir().unwrap();
    let pd = write(dir.path(), "pd.json", pd_json());
    let grim = write(dir.path(), "grim.json", r#"{"builtin": "grim_trigger"}"#);
    let out = bin()
        .args(["iterate-check"])
        .arg(&pd)
        .arg(&grim)
        .args(["--delta", "0.9", "--mode", "exact"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("Holds"));
}

#[test]
fn failing_verdicts_still_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let pd = write(dir.path(), "pd.json", pd_json());
    let grim = write(dir.path(), "grim.json", r#"{"builtin": "grim_trigger"}"#);
    let out = bin()
        .args(["iterate-check"])
        .arg(&pd)
        .arg(&grim)
        .args(["--delta", "0.3", "--mode", "exact"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "a Fails verdict is a successful analysis");
    let text = stdout_of(&out);
    assert!(text.contains("Fails"));
    assert!(text.contains("D,D"), "witness deviation should appear: {text}");
}

#[test]
fn malformed_input_exits_one_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{ not json");
    let out = bin().arg("check-nash").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = stdout_of(&out);
    assert!(text.contains("parse_error"), "{text}");
    assert!(text.contains("line"), "location expected: {text}");
}

#[test]
fn invalid_parameters_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let pd = write(dir.path(), "pd.json", pd_json());
    let grim = write(dir.path(), "grim.json", r#"{"builtin": "grim_trigger"}"#);
    let out = bin()
        .args(["iterate-check"])
        .arg(&pd)
        .arg(&grim)
        .args(["--delta", "1.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).contains("invalid_parameter"));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let pd = write(dir.path(), "pd.json", pd_json());
    let out = bin()
        .arg("check-nash")
        .arg(&pd)
        .args(["--output", "/nonexistent-dir/report.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_are_deterministic_modulo_meta() {
    let dir = tempfile::tempdir().unwrap();
    let pd = write(dir.path(), "pd.json", pd_json());
    let grim = write(dir.path(), "grim.json", r#"{"builtin": "grim_trigger"}"#);
    let run = |name: &str| -> serde_json::Value {
        let path = dir.path().join(name);
        let out = bin()
            .args(["iterate-check"])
            .arg(&pd)
            .arg(&grim)
            .args(["--delta", "0.9", "--mode", "bounded", "--depth", "8"])
            .arg("--output")
            .arg(&path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let mut report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        report.as_object_mut().unwrap().remove("meta");
        report
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn compose_and_tensor_emit_games() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", small_game_json());
    // A second game whose domain matches the first's codomain.
    let h = write(
        dir.path(),
        "h.json",
        r#"{
            "dom": {"X": ["y0", "y1"], "S": ["r0"]},
            "cod": {"Y": ["z0"], "R": ["q0"]},
            "strategies": ["u"],
            "play": {"u": {"y0": "z0", "y1": "z0"}},
            "coutility": {
                "u": {"y0": {"q0": "r0"}, "y1": {"q0": "r0"}}
            },
            "equilibrium": {"builtin": "always"}
        }"#,
    );
    let out = bin().arg("compose").arg(&g).arg(&h).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    assert!(stdout_of(&out).contains("\"strategies\""));

    let out = bin().arg("tensor").arg(&g).arg(&g).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));

    // Mismatched boundaries surface the module error verbatim.
    let out = bin().arg("compose").arg(&g).arg(&g).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).contains("boundary_mismatch"));
}

#[test]
fn condition_builds_strategy_tables() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", small_game_json());
    let out = bin()
        .arg("condition")
        .arg(&g)
        .args(["--labels", "a1,a2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    // 2 strategies over 2 indices: 4 tables.
    assert!(stdout_of(&out).contains("4 strategy tables"));
}

#[test]
fn check_morphism_exact_and_sampled() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", small_game_json());
    let id = write(
        dir.path(),
        "id.json",
        r#"{
            "alpha_Y": {"y0": "y0", "y1": "y1"},
            "alpha_Sigma": {"a": "a", "b": "b"}
        }"#,
    );
    let out = bin()
        .arg("check-morphism")
        .arg(&id)
        .arg(&g)
        .arg(&g)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    assert!(stdout_of(&out).contains("pass"));

    let out = bin()
        .arg("check-morphism")
        .arg(&id)
        .arg(&g)
        .arg(&g)
        .args(["--mode", "bounded", "--samples", "16", "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("sampled"));
}

#[test]
fn unfold_and_bisim_run() {
    let dir = tempfile::tempdir().unwrap();
    let coalgebra = write(
        dir.path(),
        "coalg.json",
        &format!(
            r#"{{
                "stage": {},
                "machine": {{"builtin": "grim_trigger"}},
                "equilibrium": {{"kind": "exact", "delta": 0.9}}
            }}"#,
            pd_json()
        ),
    );
    let out = bin()
        .arg("unfold")
        .arg(&coalgebra)
        .args(["--depth", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    assert!(stdout_of(&out).contains("streams"));

    let gen1 = write(
        dir.path(),
        "gen1.json",
        &format!(
            r#"{{"stage": {}, "strategy": {{"builtin": "grim_trigger"}}}}"#,
            pd_json()
        ),
    );
    let gen2 = write(
        dir.path(),
        "gen2.json",
        r#"{"moves": ["C,C", "C,C", "C,C", "C,C", "D,D"]}"#,
    );
    let out = bin()
        .arg("bisim")
        .arg(&gen1)
        .arg(&gen2)
        .args(["--depth", "5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout_of(&out));
    // Grim self-play stays cooperative; the explicit stream defects at 4.
    assert!(stdout_of(&out).contains("disagree at index 4"));
}
