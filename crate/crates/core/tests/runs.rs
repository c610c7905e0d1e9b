mod common;

use std::fs;

use common::criteria::determinism;
use warmstart::harness::{self, RunConfig};
use warmstart::selfplay::Mode;
use warmstart::{EnhancementKind, GameId};

fn small(game: GameId, mode: Mode) -> RunConfig {
    RunConfig {
        game,
        mode,
        kind: EnhancementKind::Wrora,
        iterations: 3,
        warmstart_iterations: 2,
        episodes: 4,
        m: 12,
        n: 4,
        ep: 2,
        channels: 4,
        hidden: 16,
        seed: 7,
        ..RunConfig::default()
    }
}

#[test]
fn repeated_runs_are_identical() {
    for (game, mode) in [(GameId::ConnectFour, Mode::Adaptive), (GameId::Othello, Mode::Fixed)] {
        let v = determinism(&small(game, mode));
        assert!(v.pass, "{game}: {}", v.detail);
    }
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut whole = small(GameId::Gobang, Mode::Adaptive);
    whole.out = tmp.path().join("whole");
    harness::train_run(&whole).unwrap();

    let mut split = whole.clone();
    split.out = tmp.path().join("split");
    let first = harness::train_run_until(&split, |s| s.iteration == 1).unwrap();
    assert_eq!(first.completed, 1);
    // a half-written next iteration without its checkpoint is ignored
    fs::write(split.out.join("buffer/iter_2.examples"), b"partial").unwrap();
    let rest = harness::train_run(&split).unwrap();
    assert_eq!(rest.completed, 3);

    for k in 1..=3 {
        for rel in [format!("checkpoints/iter_{k}.json"), format!("log/iter_{k}.json"), format!("buffer/iter_{k}.examples")] {
            assert_eq!(
                fs::read(whole.out.join(&rel)).unwrap(),
                fs::read(split.out.join(&rel)).unwrap(),
                "{rel}"
            );
        }
    }
    assert_eq!(
        fs::read(whole.out.join("log/iterations.csv")).unwrap(),
        fs::read(split.out.join("log/iterations.csv")).unwrap()
    );
}
