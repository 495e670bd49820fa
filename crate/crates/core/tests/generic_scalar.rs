//! The numeric layer is generic over the floating-point scalar; this drives
//! the whole iterated-game pipeline at f32.

use open_games::iteration::IteratedGame;
use open_games::library::{builtins, Bimatrix};
use open_games::Value;

#[test]
fn iterated_dilemma_works_at_f32() {
    let pd: Bimatrix<f32> = Bimatrix::prisoners_dilemma();
    let stage = pd.to_game(1e-5f32).unwrap();
    let iter = IteratedGame::new(stage).unwrap();
    let grim = builtins(iter.stage()).grim_trigger_pd().unwrap();

    let holds = iter
        .check_exact(&grim, &pd.utility(0.9f32).unwrap(), 1e-5)
        .unwrap();
    assert!(holds.holds());
    let fails = iter
        .check_exact(&grim, &pd.utility(0.3f32).unwrap(), 1e-5)
        .unwrap();
    assert!(fails.fails());
    assert_eq!(
        fails.witness.unwrap().deviation,
        Some(Value::pair(Value::sym("D"), Value::sym("D")))
    );
}
