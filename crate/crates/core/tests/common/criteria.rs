//! Checks shared by the integration tests and the acceptance runner. Each
//! returns a verdict with a one-line summary of what was measured.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use warmstart::evaluation::{expected_score, fit_elo, EloOptions, MatchResult};
use warmstart::harness::{self, RunConfig};
use warmstart::neural::{gradient_check, gradient_check_against, Architecture, ModelParams, TrainingExample};
use warmstart::search::{
    blend_values, leaf_value, rave_beta, rave_update, select_child, uct_rave_score, NodeStats, PathStep, RaveStats,
};
use warmstart::selfplay::{warmstart_weight, Mode};
use warmstart::{CachedEvaluator, EnhancementKind, GameId, GameState, Mcts, SearchConfig};

use super::{mask_ids, outcome_code, random_live_states, random_positions, rng, win_in_one_positions, Board};

pub const GAMES: [GameId; 3] = [GameId::ConnectFour, GameId::Othello, GameId::Gobang];

#[derive(Debug, Clone)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }

    /// All parts must pass; details are joined.
    fn all(parts: Vec<Verdict>) -> Self {
        Verdict {
            pass: parts.iter().all(|v| v.pass),
            detail: parts.iter().map(|v| v.detail.as_str()).collect::<Vec<_>>().join("; "),
        }
    }
}

// ---------------------------------------------------------------- rules

/// Walks random playouts and compares the engine with the reference rules on
/// legal moves, terminal detection and successor states.
pub fn oracle_equivalence(game: GameId, positions: usize, seed: u64) -> Verdict {
    let states = random_positions(game, positions, seed);
    let mut r = rng(seed ^ 0x5eed);
    let mut mismatches = 0usize;
    let mut first: Option<String> = None;
    let mut note = |what: String, s: &GameState, mismatches: &mut usize| {
        *mismatches += 1;
        if first.is_none() {
            first = Some(format!("{what} at\n{s}"));
        }
    };
    for s in &states {
        let b = Board::from_state(s);
        if mask_ids(s.legal_mask()) != b.legal() {
            note("legal moves".into(), s, &mut mismatches);
        }
        let engine_terminal = s.terminal_value().map(outcome_code);
        if engine_terminal != b.terminal() {
            note(format!("terminal {engine_terminal:?} vs {:?}", b.terminal()), s, &mut mismatches);
        }
        if b.terminal().is_some() {
            continue;
        }
        // every legal successor for small games, a sample for the rest
        let legal = b.legal();
        let probes: Vec<usize> = if legal.len() <= 8 {
            legal.clone()
        } else {
            (0..4).map(|_| legal[r.gen_range(0..legal.len())]).collect()
        };
        for a in probes {
            match s.apply_move(super::mv(a)) {
                Ok(next) if Board::from_state(&next) == b.apply(a) => {}
                _ => note(format!("successor of action {a}"), s, &mut mismatches),
            }
        }
        // every non-legal id must be refused
        for a in 0..game.action_size() {
            if !legal.contains(&a) && s.apply_move(super::mv(a)).is_ok() {
                note(format!("illegal action {a} accepted"), s, &mut mismatches);
            }
        }
    }
    let mut detail = format!("{game}: {} positions, {mismatches} mismatches", states.len());
    if let Some(f) = first {
        detail.push_str(&format!(", first: {f}"));
    }
    Verdict::new(mismatches == 0 && states.len() >= positions, detail)
}

// ---------------------------------------------------------------- formulas

pub fn formula_suite() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };

    for e in [1.0f64, 10.0, 100.0, 1000.0] {
        check(rave_beta::<f64>(0, e) == 1.0, "rave_beta(0, e) == 1 (f64)");
        check(rave_beta::<f32>(0, e as f32) == 1.0, "rave_beta(0, e) == 1 (f32)");
    }
    check(rave_beta::<f64>(100, 100.0) == 0.5, "rave_beta(100, 100) == 0.5 (f64)");
    check(rave_beta::<f32>(100, 100.0) == 0.5, "rave_beta(100, 100) == 0.5 (f32)");

    // blended selection score at its two ends
    let legal = 0b1111u64;
    let mut stats = NodeStats::<f64>::new(legal, &[0.1, 0.2, 0.3, 0.4]);
    let mut rave = RaveStats::<f64>::new(4);
    let (c, m) = (1.3, 0.0);
    for (a, v) in [(0, 0.5), (1, -0.2), (1, 0.9), (3, 0.1)] {
        stats.record(super::mv(a), v);
    }
    for (a, v) in [(0, -0.4), (2, 0.7), (2, 0.3), (3, -1.0), (1, 0.2)] {
        rave.record(super::mv(a), v);
    }
    for a in 0..4 {
        let mv = super::mv(a);
        // equivalence 0 gives weight 0 once the node has visits
        let pure_u = uct_rave_score(&stats, &rave, mv, c, m);
        check(pure_u == stats.puct_score(mv, c), "weight 0 reduces to U");
    }
    let fresh = NodeStats::<f64>::new(legal, &[0.1, 0.2, 0.3, 0.4]);
    for a in 0..4 {
        let mv = super::mv(a);
        let s = uct_rave_score(&fresh, &rave, mv, c, 50.0);
        check(s == rave.score(mv, fresh.prior[a], c), "weight 1 reduces to U_rave");
    }
    let argmax = |f: &dyn Fn(usize) -> f64| (0..4).max_by(|&x, &y| f(x).total_cmp(&f(y))).unwrap();
    let best_u = argmax(&|a| stats.puct_score(super::mv(a), c));
    let best_rave = argmax(&|a| rave.score(super::mv(a), stats.prior[a], c));
    check(select_child(&stats, Some(&rave), c, 10.0, Some(0.0)).index() == best_u, "select with weight 0 follows U");
    check(
        select_child(&stats, Some(&rave), c, 10.0, Some(1.0)).index() == best_rave,
        "select with weight 1 follows U_rave",
    );

    // value blend ends, directly and through leaf evaluation
    for (n, r) in [(0.3f64, -1.0f64), (-0.7, 1.0), (0.0, 0.0)] {
        check(blend_values(n, r, 0.0) == n, "weight 0 is the network value");
        check(blend_values(n, r, 1.0) == r, "weight 1 is the rollout value");
    }
    for s in random_live_states(GameId::ConnectFour, 20, 9) {
        for kind in [EnhancementKind::Wro, EnhancementKind::Wrora] {
            let v_net: f64 = leaf_value(&s, kind, 0.0, 0.25, &mut rng(1));
            check(v_net == 0.25, "weighted leaf at 0 is the network value");
            let v_roll: f64 = leaf_value(&s, kind, 1.0, 0.25, &mut rng(2));
            let pure: f64 = leaf_value(&s, EnhancementKind::Rollout, 0.5, 0.25, &mut rng(2));
            check(v_roll == pure, "weighted leaf at 1 is the rollout value");
        }
    }

    for i in 1..=100usize {
        check(warmstart_weight(i) == 1.0 / i as f64, "warmstart_weight(i) == 1/i");
    }

    failures.dedup();
    let detail = if failures.is_empty() {
        "rave weight, blended score, value blend and weight schedule identities hold".to_string()
    } else {
        format!("failed: {}", failures.join(", "))
    };
    Verdict::new(failures.is_empty(), detail)
}

// ---------------------------------------------------------------- search

fn untrained(game: GameId, seed: u64) -> ModelParams<f32> {
    ModelParams::init(Architecture::for_game(game), seed)
}

/// Root visit totals equal the simulation budget for every kind.
pub fn root_visits(states_per_game: usize, simulations: usize) -> Verdict {
    let mut bad = 0;
    let mut runs = 0;
    for game in GAMES {
        let params = untrained(game, 3);
        for (i, s) in random_live_states(game, states_per_game, 17).into_iter().enumerate() {
            let kind = EnhancementKind::ALL[i % EnhancementKind::ALL.len()];
            let mut mcts = Mcts::new(SearchConfig::new(kind, simulations, i as u64)).unwrap();
            mcts.search(&s, &params).unwrap();
            let stats = mcts.stats(&s).unwrap();
            let sum: u32 = stats.visits.iter().sum();
            runs += 1;
            if sum as usize != simulations || stats.total as usize != simulations {
                bad += 1;
            }
        }
    }
    Verdict::new(bad == 0, format!("{runs} searches at m={simulations}, {bad} with root visits != m"))
}

/// Search policies are finite, non-negative, sum to one and vanish on
/// illegal actions.
pub fn policy_validity(states_per_game: usize, simulations: usize) -> Verdict {
    let mut parts = Vec::new();
    for game in GAMES {
        let params = untrained(game, 5);
        let eval = CachedEvaluator::new(&params);
        let mut bad = 0;
        let states = random_live_states(game, states_per_game, 23);
        for (i, s) in states.iter().enumerate() {
            let kind = EnhancementKind::ALL[i % EnhancementKind::ALL.len()];
            let mut mcts = Mcts::new(SearchConfig::new(kind, simulations, i as u64)).unwrap();
            let pi = mcts.search(s, &eval).unwrap();
            let legal = s.legal_mask();
            let ok = pi.len() == game.action_size()
                && pi.as_slice().iter().all(|p| p.is_finite() && *p >= 0.0)
                && pi.as_slice().iter().enumerate().all(|(a, p)| legal & (1 << a) != 0 || *p == 0.0)
                && (pi.as_slice().iter().map(|&p| p as f64).sum::<f64>() - 1.0).abs() < 1e-5
                && s.is_legal(pi.argmax());
            if !ok {
                bad += 1;
            }
        }
        parts.push(Verdict::new(bad == 0, format!("{game}: {} states, {bad} invalid", states.len())));
    }
    Verdict::all(parts)
}

/// Share of win-in-one Connect Four positions where the search's argmax is a
/// winning column, per kind.
pub fn win_in_one(positions: usize, simulations: usize, threshold: f64) -> Verdict {
    let cases = win_in_one_positions(positions, 41);
    let params = untrained(GameId::ConnectFour, 7);
    let eval = CachedEvaluator::new(&params);
    let mut parts = Vec::new();
    for kind in EnhancementKind::ALL {
        let mut found = 0;
        for (i, (s, wins)) in cases.iter().enumerate() {
            let mut mcts = Mcts::new(SearchConfig::new(kind, simulations, i as u64)).unwrap();
            let pi = mcts.search(s, &eval).unwrap();
            if wins.contains(&pi.argmax().index()) {
                found += 1;
            }
        }
        let rate = found as f64 / cases.len() as f64;
        parts.push(Verdict::new(
            rate >= threshold,
            format!("{kind} {found}/{}", cases.len()),
        ));
    }
    Verdict::all(parts)
}

/// AMAF credits against a direct enumeration over real playouts.
pub fn amaf_brute_force(paths: usize, seed: u64) -> Verdict {
    let mut r = rng(seed);
    let mut bad = 0;
    for p in 0..paths {
        let game = GAMES[p % 3];
        let mut s = GameState::initial(game);
        let mut states = vec![s];
        let mut steps = Vec::new();
        let len = r.gen_range(1..20);
        while steps.len() < len && !s.is_terminal() {
            let legal = s.legal_mask();
            let ids = mask_ids(legal);
            let a = super::mv(ids[r.gen_range(0..ids.len())]);
            steps.push(PathStep {
                key: s.key(),
                legal,
                action: a,
            });
            s = s.apply_move(a).unwrap();
            states.push(s);
        }
        let leaf = *states.last().unwrap();
        let leaf_value = r.gen_range(-1.0..1.0f64);

        let mut got = Vec::new();
        rave_update(&steps, leaf_value, |k, a, v| got.push((k, a.index(), v)));

        // for each visited state: every later action legal there, first occurrence only,
        // valued from that state's mover
        let mut want = Vec::new();
        for t1 in 0..steps.len() {
            let here = states[t1];
            let value = if here.to_move() == leaf.to_move() { leaf_value } else { -leaf_value };
            let mut credited = std::collections::BTreeSet::new();
            for step in &steps[t1..] {
                let a = step.action.index();
                if here.legal_mask() & (1 << a) != 0 && credited.insert(a) {
                    want.push((here.key(), a, value));
                }
            }
        }
        got.sort_by(|x, y| x.partial_cmp(y).unwrap());
        want.sort_by(|x, y| x.partial_cmp(y).unwrap());
        if got != want {
            bad += 1;
        }
    }
    Verdict::new(bad == 0, format!("{paths} paths, {bad} with differing AMAF credits"))
}

// ---------------------------------------------------------------- network

fn random_example(game: GameId, s: &GameState, r: &mut impl Rng) -> TrainingExample<f32> {
    let legal = s.legal_mask();
    let mut pi = vec![0.0f32; game.action_size()];
    for a in mask_ids(legal) {
        pi[a] = r.gen_range(0.01..1.0);
    }
    let total: f32 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    TrainingExample {
        x: s.encode(),
        pi,
        z: [-1.0, 0.0, 1.0][r.gen_range(0..3)],
    }
}

pub fn gradient_check_suite(examples_per_game: usize, tolerance: f64) -> Verdict {
    let mut parts = Vec::new();
    for game in GAMES {
        let params = untrained(game, 11);
        let mut r = rng(13);
        let mut worst = 0.0f64;
        for (i, s) in random_live_states(game, examples_per_game, 19).iter().enumerate() {
            let ex = random_example(game, s, &mut r);
            let report = gradient_check(&params, &ex, i as u64);
            worst = worst.max(report.max_relative_error);
        }
        parts.push(Verdict::new(
            worst < tolerance,
            format!("{game}: worst relative error {worst:.2e} over {examples_per_game} examples"),
        ));
    }
    Verdict::all(parts)
}

/// A gradient with one tensor perturbed must be rejected by the same check.
pub fn corrupted_gradient_detected(tolerance: f64) -> Verdict {
    let mut parts = Vec::new();
    for game in GAMES {
        let params: ModelParams<f64> = untrained(game, 11).cast();
        let s = random_live_states(game, 1, 3)[0];
        let ex32 = random_example(game, &s, &mut rng(4));
        let ex = TrainingExample {
            x: ex32.x.iter().map(|&v| v as f64).collect(),
            pi: ex32.pi.iter().map(|&v| v as f64).collect(),
            z: ex32.z as f64,
        };
        let mut grads = params.zeros_like();
        params.backward(&ex, None, &mut grads).unwrap();
        let clean = gradient_check_against(&params, &ex, &grads, 1).max_relative_error;
        // scale every tensor's gradient by 1.5
        for t in grads.tensors.iter_mut() {
            t.iter_mut().for_each(|g| *g *= 1.5);
        }
        let corrupted = gradient_check_against(&params, &ex, &grads, 1).max_relative_error;
        parts.push(Verdict::new(
            clean < tolerance && corrupted >= tolerance,
            format!("{game}: clean {clean:.1e}, corrupted {corrupted:.1e}"),
        ));
    }
    Verdict::all(parts)
}

// ---------------------------------------------------------------- elo

fn sample_league(truth: &[(&str, f64)], games: usize, seed: u64) -> Vec<MatchResult> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for i in 0..truth.len() {
        for j in i + 1..truth.len() {
            let p = expected_score(truth[i].1, truth[j].1);
            let wins_a = (0..games).filter(|_| r.gen_bool(p)).count();
            out.push(MatchResult {
                player_a: truth[i].0.to_string(),
                player_b: truth[j].0.to_string(),
                wins_a,
                wins_b: games - wins_a,
                draws: 0,
                games,
            });
        }
    }
    out
}

/// Recovers a synthetic league and the analytic two-player 75/25 gap.
pub fn elo_suite(games_per_pair: usize) -> Verdict {
    let truth = [("a", -320.0), ("b", -90.0), ("c", 10.0), ("d", 150.0), ("e", 250.0)];
    let mean = truth.iter().map(|t| t.1).sum::<f64>() / truth.len() as f64;
    let fit = fit_elo(&sample_league(&truth, games_per_pair, 99), &EloOptions::default()).unwrap();
    let worst = truth
        .iter()
        .map(|(id, r)| (fit.table.rating(id).unwrap() - (r - mean)).abs())
        .fold(0.0, f64::max);
    let league = Verdict::new(
        worst <= 15.0,
        format!("5-player league at {games_per_pair} games/pair: worst error {worst:.1} Elo"),
    );

    let pair = MatchResult {
        player_a: "strong".into(),
        player_b: "weak".into(),
        wins_a: 75,
        wins_b: 25,
        draws: 0,
        games: 100,
    };
    let opts = EloOptions {
        pseudo_draws: false,
        ..EloOptions::default()
    };
    let fit = fit_elo(&[pair], &opts).unwrap();
    let gap = fit.table.rating("strong").unwrap() - fit.table.rating("weak").unwrap();
    let two = Verdict::new((gap - 190.8).abs() <= 0.1, format!("75/25 gap {gap:.3}"));
    Verdict::all(vec![league, two])
}

// ---------------------------------------------------------------- runs

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "manifest.json" {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Two runs of `cfg` into fresh directories, the second on a 3-thread pool,
/// must leave byte-identical checkpoints, buffers and logs.
pub fn determinism(cfg: &RunConfig) -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: usize| {
        let mut c = cfg.clone();
        c.out = tmp.path().join(name);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| harness::train_run(&c)).unwrap();
        files_under(&c.out)
    };
    let a = run("a", 1);
    let b = run("b", 3);
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let checkpoints = a.keys().filter(|k| k.starts_with("checkpoints")).count();
    Verdict::new(
        differing.is_empty() && checkpoints == cfg.iterations,
        format!(
            "{} files, {checkpoints} checkpoints, {} differing{}",
            a.len(),
            differing.len(),
            differing.first().map(|d| format!(" (first {d})")).unwrap_or_default()
        ),
    )
}

/// Head-to-head with untrained networks against default search.
pub fn table2(repetitions: usize) -> Verdict {
    use EnhancementKind::*;
    let tmp = tempfile::tempdir().unwrap();
    // (game, kind, low, high)
    let bands: Vec<(GameId, EnhancementKind, f64, f64)> = vec![
        (GameId::Othello, Rollout, 0.85, 1.0),
        (GameId::Othello, Rora, 0.85, 1.0),
        (GameId::Othello, Wro, 0.85, 1.0),
        (GameId::Othello, Wrora, 0.85, 1.0),
        (GameId::Othello, Rave, 0.40, 0.70),
        (GameId::ConnectFour, Rollout, 0.55, 1.0),
        (GameId::ConnectFour, Rora, 0.55, 1.0),
        (GameId::ConnectFour, Wro, 0.55, 1.0),
        (GameId::ConnectFour, Wrora, 0.55, 1.0),
        (GameId::ConnectFour, Rave, 0.0, 0.45),
        (GameId::Gobang, Rollout, 0.50, 0.80),
    ];
    let mut parts = Vec::new();
    // one pair per run; pair seeds depend only on the two ids, so each result
    // equals the corresponding cell of the full matrix
    for (game, kind, lo, hi) in bands {
        let mut cfg = RunConfig {
            game,
            out: tmp.path().join(format!("{}_{kind}", game.name())),
            ..RunConfig::default()
        };
        cfg.apply_preset(harness::Preset::Table2);
        cfg.repetitions = repetitions;
        let results = harness::compare(&cfg, &[kind]).unwrap();
        let r = &results[0];
        let r = if r.player_a == kind.name() { r.clone() } else { r.swapped() };
        let w = r.score_a();
        parts.push(Verdict::new(
            w >= lo && w <= hi,
            format!("{game} {kind} {:.1}% in [{:.0}, {:.0}]", 100.0 * w, 100.0 * lo, 100.0 * hi),
        ));
    }
    Verdict::all(parts)
}

/// Adaptive runs per game; each stops at its switch. A run that never
/// switches counts as `iterations + 1`.
pub fn switch_iterations(game: GameId, seeds: &[u64], iterations: usize, root: &Path) -> Vec<Option<usize>> {
    seeds
        .iter()
        .map(|&seed| {
            let cfg = RunConfig {
                game,
                seed,
                iterations,
                mode: Mode::Adaptive,
                kind: EnhancementKind::Wrora,
                out: root.join(format!("{}_{seed}", game.name())),
                ..RunConfig::default()
            };
            let summary = harness::train_run_until(&cfg, |s| s.switch.switched).unwrap();
            summary.switch.switch_iteration
        })
        .collect()
}

pub fn table3(seeds: &[u64], iterations: usize) -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mean = |v: &[Option<usize>]| {
        v.iter().map(|s| s.unwrap_or(iterations + 1) as f64).sum::<f64>() / v.len() as f64
    };
    let show = |v: &[Option<usize>]| {
        v.iter()
            .map(|s| s.map(|i| i.to_string()).unwrap_or_else(|| "-".into()))
            .collect::<Vec<_>>()
            .join(",")
    };
    let gobang = switch_iterations(GameId::Gobang, seeds, iterations, tmp.path());
    let early = gobang.iter().filter(|s| matches!(s, Some(1) | Some(2))).count();
    let mut parts = vec![Verdict::new(
        early * 4 >= seeds.len() * 3,
        format!("gobang switches [{}], {early}/{} at 1 or 2", show(&gobang), seeds.len()),
    )];
    let g_mean = mean(&gobang);
    for game in [GameId::ConnectFour, GameId::Othello] {
        let s = switch_iterations(game, seeds, iterations, tmp.path());
        let m = mean(&s);
        parts.push(Verdict::new(
            m > g_mean,
            format!("{game} switches [{}], mean {m:.2} vs gobang {g_mean:.2}", show(&s)),
        ));
    }
    Verdict::all(parts)
}

/// Least-squares slope of `ys` against their index.
pub fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = ys.iter().enumerate().map(|(i, y)| (i as f64 - mx) * (y - my)).sum();
    let den: f64 = (0..ys.len()).map(|i| (i as f64 - mx).powi(2)).sum();
    num / den
}

/// Baseline, fixed and adaptive Connect Four runs for `iterations` each.
pub fn smoke_runs(base: &RunConfig) -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut parts = Vec::new();
    for (mode, kind) in [
        (Mode::Baseline, EnhancementKind::Baseline),
        (Mode::Fixed, EnhancementKind::Wrora),
        (Mode::Adaptive, EnhancementKind::Wrora),
    ] {
        let cfg = RunConfig {
            game: GameId::ConnectFour,
            mode,
            kind,
            warmstart_iterations: 5,
            out: tmp.path().join(mode.name()),
            ..base.clone()
        };
        let summary = match harness::train_run(&cfg) {
            Ok(s) => s,
            Err(e) => {
                parts.push(Verdict::new(false, format!("{} failed: {e}", mode.name())));
                continue;
            }
        };
        let dir = &summary.dir;
        let monotone = (1..=cfg.iterations).all(|k| {
            warmstart::neural::load_checkpoint::<f32>(&dir.checkpoint(k))
                .map(|(_, it)| it == k)
                .unwrap_or(false)
        });
        let logs_ok = summary.logs.iter().enumerate().all(|(i, l)| l.iteration == i + 1);
        let mut detail = format!(
            "{}: {} iterations, checkpoints in order {monotone}",
            mode.name(),
            summary.completed
        );
        let mut pass = summary.completed == cfg.iterations && monotone && logs_ok;
        if mode == Mode::Adaptive {
            let trace: Vec<f64> = summary.logs.iter().filter_map(|l| l.r_mcts).map(|r| r as f64).collect();
            let s = slope(&trace);
            detail.push_str(&format!(
                ", switch {:?}, r_mcts trace {:?}, slope {s:.2}",
                summary.switch.switch_iteration, trace
            ));
            pass &= s >= 0.0;
        }
        parts.push(Verdict::new(pass, detail));
    }
    Verdict::all(parts)
}
