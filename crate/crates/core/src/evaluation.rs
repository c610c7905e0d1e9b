//! Head-to-head matches, round-robin tournaments and maximum-likelihood Elo.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameId, GameState, Player};
use crate::neural::{Architecture, ModelParams};
use crate::scalar::Scalar;
use crate::search::{CachedEvaluator, EnhancementKind, Mcts, SearchConfig, SearchError};
use crate::seeds::derive_seed;
use crate::selfplay::{select_action, PLY_CAP};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("invalid match setup: {0}")]
    InvalidSetup(String),
    #[error("result graph is disconnected: components {0}")]
    Disconnected(String),
    #[error("player '{0}' has no wins or draws; enable the pseudo-draw regularizer")]
    Degenerate(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where an agent's priors and values come from.
#[derive(Debug, Clone)]
pub enum Network<F> {
    /// A trained (or otherwise fixed) network.
    Fixed(Arc<ModelParams<F>>),
    /// A freshly initialized network per game, seeded from the game seed so
    /// both sides of a game see the same weights.
    Untrained(Architecture),
}

#[derive(Debug, Clone)]
pub struct Agent<F> {
    pub id: String,
    pub kind: EnhancementKind,
    /// Blend weight for the weighted kinds.
    pub weight: f64,
    pub network: Network<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub game: GameId,
    /// In-a-row target; ignored for Othello.
    pub win_length: u8,
    pub simulations: usize,
    pub c: f64,
    /// Plies sampled from π before switching to argmax; 0 plays argmax throughout.
    pub exploration_steps: usize,
}

impl MatchConfig {
    pub fn new(game: GameId) -> Self {
        MatchConfig {
            game,
            win_length: game.default_win_length(),
            simulations: 100,
            c: 1.0,
            exploration_steps: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchResult {
    pub player_a: String,
    pub player_b: String,
    pub wins_a: usize,
    pub wins_b: usize,
    pub draws: usize,
    pub games: usize,
}

impl MatchResult {
    /// Score of `player_a` with draws as half a point.
    pub fn score_a(&self) -> f64 {
        (self.wins_a as f64 + 0.5 * self.draws as f64) / self.games as f64
    }

    pub fn is_consistent(&self) -> bool {
        self.wins_a + self.wins_b + self.draws == self.games
    }

    /// The same result seen from `player_b`'s side.
    pub fn swapped(&self) -> Self {
        MatchResult {
            player_a: self.player_b.clone(),
            player_b: self.player_a.clone(),
            wins_a: self.wins_b,
            wins_b: self.wins_a,
            draws: self.draws,
            games: self.games,
        }
    }
}

fn network_for<F: Scalar>(net: &Network<F>, game_seed: u64) -> Arc<ModelParams<F>> {
    match net {
        Network::Fixed(p) => Arc::clone(p),
        Network::Untrained(arch) => Arc::new(ModelParams::init(*arch, derive_seed(game_seed, "network", &[]))),
    }
}

fn search_config<F: Scalar>(agent: &Agent<F>, cfg: &MatchConfig, seed: u64) -> SearchConfig<F> {
    SearchConfig {
        simulations: cfg.simulations,
        c: F::of(cfg.c),
        equivalence: F::of_usize(cfg.simulations),
        kind: agent.kind,
        weight: F::of(agent.weight),
        seed,
        reuse_tree: false,
    }
}

/// Plays one game; returns the winner by seat (`first` moves first).
pub fn play_game<F: Scalar>(
    first: &Agent<F>,
    second: &Agent<F>,
    cfg: &MatchConfig,
    seed: u64,
) -> Result<Option<Player>, EvaluationError> {
    let nets = [network_for(&first.network, seed), network_for(&second.network, seed)];
    let evals = [CachedEvaluator::new(&*nets[0]), CachedEvaluator::new(&*nets[1])];
    let mut searchers = [
        Mcts::new(search_config(first, cfg, derive_seed(seed, "search", &[0])))?,
        Mcts::new(search_config(second, cfg, derive_seed(seed, "search", &[1])))?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "moves", &[]));
    let mut state = GameState::initial_with_win_length(cfg.game, cfg.win_length);
    for t in 1..=PLY_CAP {
        if state.is_terminal() {
            break;
        }
        let side = (t - 1) % 2;
        let pi = searchers[side].search(&state, &evals[side])?;
        state = state.play(select_action(&pi, t, cfg.exploration_steps, &mut rng));
    }
    Ok(match state.terminal_value() {
        Some(crate::game::Outcome::Win(p)) => Some(p),
        _ => None,
    })
}

/// Plays `games` games with the first move alternating, `a` first in even
/// games. Deterministic per seed.
pub fn play_match<F: Scalar>(
    a: &Agent<F>,
    b: &Agent<F>,
    games: usize,
    cfg: &MatchConfig,
    seed: u64,
) -> Result<MatchResult, EvaluationError> {
    if games == 0 || games % 2 != 0 {
        return Err(EvaluationError::InvalidSetup(format!(
            "game count must be a positive even number, got {games}"
        )));
    }
    let outcomes = (0..games)
        .into_par_iter()
        .map(|g| {
            let game_seed = derive_seed(seed, "game", &[g as u64]);
            let a_first = g % 2 == 0;
            let winner = if a_first {
                play_game(a, b, cfg, game_seed)?
            } else {
                play_game(b, a, cfg, game_seed)?
            };
            // +1 when `a` won
            Ok(match winner {
                None => 0i8,
                Some(Player::One) if a_first => 1,
                Some(Player::Two) if !a_first => 1,
                Some(_) => -1,
            })
        })
        .collect::<Result<Vec<_>, EvaluationError>>()?;
    let wins_a = outcomes.iter().filter(|&&o| o > 0).count();
    let wins_b = outcomes.iter().filter(|&&o| o < 0).count();
    Ok(MatchResult {
        player_a: a.id.clone(),
        player_b: b.id.clone(),
        wins_a,
        wins_b,
        draws: games - wins_a - wins_b,
        games,
    })
}

/// Every unordered pair plays `games_per_pair` games. Pairs are oriented by
/// id and seeded from the ids, so the input order does not matter.
pub fn round_robin<F: Scalar>(
    players: &[Agent<F>],
    games_per_pair: usize,
    cfg: &MatchConfig,
    seed: u64,
) -> Result<Vec<MatchResult>, EvaluationError> {
    if players.len() < 2 {
        return Err(EvaluationError::InvalidSetup("a round robin needs at least two players".into()));
    }
    let mut sorted: Vec<&Agent<F>> = players.iter().collect();
    sorted.sort_by(|x, y| x.id.cmp(&y.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(EvaluationError::InvalidSetup(format!("duplicate player id '{}'", w[0].id)));
    }
    let id_hash = |id: &str| derive_seed(0, id, &[]);
    let mut results = Vec::new();
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            let pair_seed = derive_seed(seed, "tournament", &[id_hash(&a.id), id_hash(&b.id)]);
            log::info!("round robin: {} vs {}", a.id, b.id);
            results.push(play_match(a, b, games_per_pair, cfg, pair_seed)?);
        }
    }
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EloOptions {
    /// Adds one draw to every pair that played, keeping ratings finite when
    /// someone never scored.
    pub pseudo_draws: bool,
    /// Stop once no rating moves more than this many points.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EloOptions {
    fn default() -> Self {
        EloOptions {
            pseudo_draws: true,
            tolerance: 0.01,
            max_iterations: 100_000,
        }
    }
}

/// Ratings with mean zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloTable {
    pub ratings: BTreeMap<String, f64>,
    pub games: BTreeMap<String, usize>,
}

impl EloTable {
    pub fn rating(&self, id: &str) -> Option<f64> {
        self.ratings.get(id).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EloFit {
    pub table: EloTable,
    pub iterations: usize,
    /// Log-likelihood after each update, starting from all-equal ratings.
    pub log_likelihood: Vec<f64>,
}

/// Logistic win probability for a rating gap `ra − rb`.
pub fn expected_score(ra: f64, rb: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0))
}

/// Maximum-likelihood ratings under `P(a beats b) = 1/(1+10^((rb−ra)/400))`
/// with draws as half a win for each side, fitted by minorization-maximization.
pub fn fit_elo(results: &[MatchResult], opts: &EloOptions) -> Result<EloFit, EvaluationError> {
    let mut ids = BTreeSet::new();
    for r in results {
        if !r.is_consistent() {
            return Err(EvaluationError::InvalidSetup(format!(
                "{} vs {}: wins and draws do not add up to the game count",
                r.player_a, r.player_b
            )));
        }
        ids.insert(r.player_a.clone());
        ids.insert(r.player_b.clone());
    }
    let ids: Vec<String> = ids.into_iter().collect();
    let n = ids.len();
    if n < 2 {
        return Err(EvaluationError::InvalidSetup("need at least two players".into()));
    }
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    // pairwise games and scores
    let mut games = vec![vec![0.0f64; n]; n];
    let mut score = vec![vec![0.0f64; n]; n];
    let mut played = vec![0usize; n];
    for r in results {
        let (a, b) = (index[r.player_a.as_str()], index[r.player_b.as_str()]);
        if a == b {
            return Err(EvaluationError::InvalidSetup(format!("'{}' plays itself", r.player_a)));
        }
        games[a][b] += r.games as f64;
        games[b][a] += r.games as f64;
        score[a][b] += r.wins_a as f64 + 0.5 * r.draws as f64;
        score[b][a] += r.wins_b as f64 + 0.5 * r.draws as f64;
        played[a] += r.games;
        played[b] += r.games;
    }
    if opts.pseudo_draws {
        for a in 0..n {
            for b in 0..n {
                if a != b && games[a][b] > 0.0 {
                    games[a][b] += 1.0;
                    score[a][b] += 0.5;
                }
            }
        }
    }

    check_connected(&ids, &games)?;
    let wins: Vec<f64> = score.iter().map(|row| row.iter().sum()).collect();
    if let Some(i) = wins.iter().position(|&w| w <= 0.0) {
        return Err(EvaluationError::Degenerate(ids[i].clone()));
    }
    if let Some(i) = (0..n).find(|&i| (0..n).all(|j| score[j][i] <= 0.0)) {
        return Err(EvaluationError::Degenerate(format!("{} (never lost)", ids[i])));
    }

    let log_likelihood = |gamma: &[f64]| {
        let mut ll = 0.0;
        for a in 0..n {
            for b in 0..n {
                if score[a][b] > 0.0 {
                    ll += score[a][b] * (gamma[a] / (gamma[a] + gamma[b])).ln();
                }
            }
        }
        ll
    };

    let mut gamma = vec![1.0f64; n];
    let mut trace = vec![log_likelihood(&gamma)];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next = vec![0.0; n];
        for i in 0..n {
            let denom: f64 = (0..n)
                .filter(|&j| j != i && games[i][j] > 0.0)
                .map(|j| games[i][j] / (gamma[i] + gamma[j]))
                .sum();
            next[i] = wins[i] / denom;
        }
        // fix the scale: geometric mean one
        let log_mean = next.iter().map(|g| g.ln()).sum::<f64>() / n as f64;
        next.iter_mut().for_each(|g| *g = (g.ln() - log_mean).exp());
        let shift = gamma
            .iter()
            .zip(&next)
            .map(|(g, h)| 400.0 * (h.log10() - g.log10()).abs())
            .fold(0.0, f64::max);
        gamma = next;
        trace.push(log_likelihood(&gamma));
        if shift < opts.tolerance || iterations >= opts.max_iterations {
            break;
        }
    }

    let raw: Vec<f64> = gamma.iter().map(|g| 400.0 * g.log10()).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let table = EloTable {
        ratings: ids.iter().cloned().zip(raw.iter().map(|r| r - mean)).collect(),
        games: ids.iter().cloned().zip(played).collect(),
    };
    Ok(EloFit {
        table,
        iterations,
        log_likelihood: trace,
    })
}

fn check_connected(ids: &[String], games: &[Vec<f64>]) -> Result<(), EvaluationError> {
    let n = ids.len();
    let mut component = vec![usize::MAX; n];
    let mut count = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = count;
        while let Some(v) = stack.pop() {
            for w in 0..n {
                if games[v][w] > 0.0 && component[w] == usize::MAX {
                    component[w] = count;
                    stack.push(w);
                }
            }
        }
        count += 1;
    }
    if count == 1 {
        return Ok(());
    }
    let groups: Vec<String> = (0..count)
        .map(|c| {
            let members: Vec<&str> = (0..n).filter(|&i| component[i] == c).map(|i| ids[i].as_str()).collect();
            format!("{{{}}}", members.join(", "))
        })
        .collect();
    Err(EvaluationError::Disconnected(groups.join(" ")))
}

pub fn write_results_csv<W: Write>(mut w: W, results: &[MatchResult]) -> std::io::Result<()> {
    writeln!(w, "player_a,player_b,wins_a,wins_b,draws,games,score_a")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{},{:.4}",
            r.player_a,
            r.player_b,
            r.wins_a,
            r.wins_b,
            r.draws,
            r.games,
            r.score_a()
        )?;
    }
    Ok(())
}

pub fn read_results_csv(text: &str) -> Result<Vec<MatchResult>, EvaluationError> {
    let bad = |line: usize, what: &str| EvaluationError::InvalidSetup(format!("results.csv line {line}: {what}"));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 6 {
            return Err(bad(i + 1, "expected at least 6 fields"));
        }
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(i + 1, "bad count"));
        out.push(MatchResult {
            player_a: f[0].to_string(),
            player_b: f[1].to_string(),
            wins_a: num(f[2])?,
            wins_b: num(f[3])?,
            draws: num(f[4])?,
            games: num(f[5])?,
        });
    }
    Ok(out)
}

pub fn write_elo_csv<W: Write>(mut w: W, table: &EloTable) -> std::io::Result<()> {
    writeln!(w, "player,rating,games")?;
    for (id, rating) in &table.ratings {
        writeln!(w, "{id},{rating:.2},{}", table.games.get(id).copied().unwrap_or(0))?;
    }
    Ok(())
}

/// Rows of `kind,i_prime,elo` for the fixed warm-start length sweep.
pub fn write_fixed_iprime_csv<W: Write>(mut w: W, rows: &[(EnhancementKind, usize, f64)]) -> std::io::Result<()> {
    writeln!(w, "kind,i_prime,elo")?;
    for (kind, i_prime, elo) in rows {
        writeln!(w, "{kind},{i_prime},{elo:.2}")?;
    }
    Ok(())
}

/// Rows of `run,iteration,r_mcts` from adaptive runs.
pub fn write_reward_balance_csv<W: Write>(mut w: W, rows: &[(String, usize, i64)]) -> std::io::Result<()> {
    writeln!(w, "run,iteration,r_mcts")?;
    for (run, iteration, r) in rows {
        writeln!(w, "{run},{iteration},{r}")?;
    }
    Ok(())
}

/// Rows of `kind,mode,elo` comparing adaptive and fixed training.
pub fn write_adaptive_vs_fixed_csv<W: Write>(mut w: W, rows: &[(EnhancementKind, String, f64)]) -> std::io::Result<()> {
    writeln!(w, "kind,mode,elo")?;
    for (kind, mode, elo) in rows {
        writeln!(w, "{kind},{mode},{elo:.2}")?;
    }
    Ok(())
}
