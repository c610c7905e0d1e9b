//! Self-play training loops: fixed-length warm-start, the adaptive switch
//! driven by an in-self-play arena, and the model gating arena.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameId, GameState, Move, Player};
use crate::neural::{train, ModelParams, NeuralError, ReplayBuffer, TrainConfig, TrainingExample};
use crate::scalar::Scalar;
use crate::search::{CachedEvaluator, EnhancementKind, Mcts, PolicyVector, SearchConfig, SearchError};
use crate::seeds::derive_seed;

/// Games longer than this are abandoned and scored as draws.
pub const PLY_CAP: usize = 200;

#[derive(Debug, Error)]
pub enum SelfPlayError {
    #[error("invalid loop configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Enhancement for the first `I′` iterations, then default search.
    Fixed,
    /// Arena between enhancement and default search until the latter wins.
    Adaptive,
    /// Default search throughout.
    Baseline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fixed => "fixed",
            Mode::Adaptive => "adaptive",
            Mode::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(Mode::Fixed),
            "adaptive" => Ok(Mode::Adaptive),
            "baseline" => Ok(Mode::Baseline),
            _ => Err(format!("unknown mode '{s}' (fixed, adaptive, baseline)")),
        }
    }
}

/// Blend weight schedule for the weighted enhancements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPolicy {
    Half,
    OneOverI,
}

impl WeightPolicy {
    pub fn weight(self, iteration: usize) -> f64 {
        match self {
            WeightPolicy::Half => 0.5,
            WeightPolicy::OneOverI => warmstart_weight(iteration),
        }
    }
}

impl std::str::FromStr for WeightPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "half" => Ok(WeightPolicy::Half),
            "one_over_i" | "one-over-i" => Ok(WeightPolicy::OneOverI),
            _ => Err(format!("unknown weight policy '{s}' (half, one_over_i)")),
        }
    }
}

/// Blend weight at iteration `i` (1-based).
pub fn warmstart_weight(i: usize) -> f64 {
    assert!(i >= 1, "iterations are 1-based");
    1.0 / i as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub game: GameId,
    /// In-a-row target; ignored for Othello.
    pub win_length: u8,
    pub iterations: usize,
    pub warmstart_iterations: usize,
    pub episodes: usize,
    pub exploration_steps: usize,
    pub gating_games: usize,
    pub update_threshold: f64,
    pub kind: EnhancementKind,
    pub mode: Mode,
    pub weight_policy: WeightPolicy,
    pub simulations: usize,
    pub c: f64,
    /// Iterations of examples kept for retraining.
    pub buffer_iterations: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl LoopConfig {
    pub fn new(game: GameId, kind: EnhancementKind, mode: Mode) -> Self {
        LoopConfig {
            game,
            win_length: game.default_win_length(),
            iterations: 100,
            warmstart_iterations: 5,
            episodes: 50,
            exploration_steps: 15,
            gating_games: 40,
            update_threshold: 0.6,
            kind,
            mode,
            weight_policy: WeightPolicy::OneOverI,
            simulations: 100,
            c: 1.0,
            buffer_iterations: 20,
            train: TrainConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SelfPlayError> {
        let bad = |m: &str| Err(SelfPlayError::InvalidConfig(m.to_string()));
        if self.iterations == 0 {
            return bad("I must be at least 1");
        }
        if self.game != GameId::Othello && !(3..=6).contains(&self.win_length) {
            return bad("win_length must lie in 3..=6");
        }
        if self.mode == Mode::Fixed && self.warmstart_iterations >= self.iterations {
            return bad("I_prime must be smaller than I");
        }
        if self.episodes == 0 || self.episodes % 2 != 0 {
            return bad("E must be a positive even number");
        }
        if !(self.update_threshold > 0.5 && self.update_threshold <= 1.0) {
            return bad("u must lie in (0.5, 1]");
        }
        if self.gating_games == 0 || self.gating_games % 2 != 0 {
            return bad("n must be a positive even number");
        }
        if self.simulations == 0 {
            return bad("m must be at least 1");
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return bad("c must be non-negative");
        }
        if self.buffer_iterations == 0 {
            return bad("rs must be at least 1");
        }
        self.train.validate()?;
        Ok(())
    }

    fn search<F: Scalar>(&self, kind: EnhancementKind, weight: f64, seed: u64) -> SearchConfig<F> {
        SearchConfig {
            simulations: self.simulations,
            c: F::of(self.c),
            equivalence: F::of_usize(self.simulations),
            kind,
            weight: F::of(weight),
            seed,
            reuse_tree: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchState {
    pub switched: bool,
    pub r_mcts: i64,
    pub switch_iteration: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub episodes: usize,
    pub examples: usize,
    /// Search kind that produced the episodes (`baseline` after warm-start).
    pub search: String,
    /// Default-search reward balance over this iteration's arena episodes.
    pub r_mcts: Option<i64>,
    pub final_loss: f64,
    pub gate: GateResult,
}

impl IterationLog {
    pub const CSV_HEADER: &'static str =
        "iteration,episodes,examples,search,r_mcts,final_loss,new_wins,old_wins,draws,new_winrate,accepted";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.episodes,
            self.examples,
            self.search,
            self.r_mcts.map(|r| r.to_string()).unwrap_or_default(),
            self.final_loss,
            self.gate.new_wins,
            self.gate.old_wins,
            self.gate.draws,
            self.gate.winrate().map(|w| w.to_string()).unwrap_or_default(),
            self.gate.accepted,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateResult {
    pub new_wins: usize,
    pub old_wins: usize,
    pub draws: usize,
    pub accepted: bool,
}

impl GateResult {
    /// Share of decided games won by the new network.
    pub fn winrate(&self) -> Option<f64> {
        let decided = self.new_wins + self.old_wins;
        (decided > 0).then(|| self.new_wins as f64 / decided as f64)
    }

    /// Acceptance rule: strictly above `u` among decided games.
    pub fn decide(new_wins: usize, old_wins: usize, draws: usize, u: f64) -> Self {
        let decided = new_wins + old_wins;
        let accepted = decided > 0 && new_wins as f64 > u * decided as f64;
        GateResult {
            new_wins,
            old_wins,
            draws,
            accepted,
        }
    }
}

/// Samples from `pi` during the first `exploration_steps` plies (1-based
/// `t`), argmax afterwards.
pub fn select_action<F: Scalar, R: Rng + ?Sized>(
    pi: &PolicyVector<F>,
    t: usize,
    exploration_steps: usize,
    rng: &mut R,
) -> Move {
    if t <= exploration_steps {
        pi.sample(rng)
    } else {
        pi.argmax()
    }
}

/// One game's worth of examples plus its result.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode<F> {
    pub examples: Vec<TrainingExample<F>>,
    /// Player to move and move played at each ply.
    pub movers: Vec<Player>,
    pub actions: Vec<Move>,
    /// Search kind used at each ply.
    pub kinds: Vec<EnhancementKind>,
    /// `None` when the ply cap was hit.
    pub winner: Option<Player>,
    pub capped: bool,
}

/// Plays one game where the side moving at ply `t` uses `kinds[(t - 1) % 2]`.
fn play_episode<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &LoopConfig,
    kinds: [EnhancementKind; 2],
    weight: f64,
    seed: u64,
) -> Result<Episode<F>, SelfPlayError> {
    let eval = CachedEvaluator::new(params);
    let mut searchers = [
        Mcts::new(cfg.search::<F>(kinds[0], weight, derive_seed(seed, "search", &[0])))?,
        Mcts::new(cfg.search::<F>(kinds[1], weight, derive_seed(seed, "search", &[1])))?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "moves", &[]));
    let mut state = GameState::initial_with_win_length(cfg.game, cfg.win_length);
    let mut states = Vec::new();
    let mut policies = Vec::new();
    let mut movers = Vec::new();
    let mut used = Vec::new();
    let mut actions = Vec::new();
    let mut t = 0;
    let outcome = loop {
        if let Some(outcome) = state.terminal_value() {
            break Some(outcome);
        }
        if t >= PLY_CAP {
            log::warn!("episode hit the {PLY_CAP}-ply cap; scoring it as a draw");
            break None;
        }
        t += 1;
        let side = (t - 1) % 2;
        let pi = searchers[side].search(&state, &eval)?;
        let action = select_action(&pi, t, cfg.exploration_steps, &mut rng);
        states.push(state);
        movers.push(state.to_move());
        used.push(kinds[side]);
        actions.push(action);
        policies.push(pi);
        state = state.play(action);
    };
    let winner = outcome.and_then(|o| match o {
        crate::game::Outcome::Win(p) => Some(p),
        crate::game::Outcome::Draw => None,
    });
    let examples = states
        .iter()
        .zip(policies)
        .map(|(s, pi)| TrainingExample {
            x: s.encode(),
            pi: pi.0,
            z: match winner {
                Some(w) if w == s.to_move() => F::one(),
                Some(_) => -F::one(),
                None => F::zero(),
            },
        })
        .collect();
    Ok(Episode {
        examples,
        movers,
        actions,
        kinds: used,
        winner,
        capped: outcome.is_none(),
    })
}

/// Self-play with both sides searching with `kind`.
pub fn run_episode_selfplay<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &LoopConfig,
    kind: EnhancementKind,
    weight: f64,
    seed: u64,
) -> Result<Episode<F>, SelfPlayError> {
    play_episode(params, cfg, [kind, kind], weight, seed)
}

/// Arena episode between `cfg.kind` and default search. Returns the episode
/// and the default side's reward in {+1, 0, −1}.
pub fn run_episode_mixed<F: Scalar>(
    params: &ModelParams<F>,
    cfg: &LoopConfig,
    enhancement_moves_first: bool,
    weight: f64,
    seed: u64,
) -> Result<(Episode<F>, i64), SelfPlayError> {
    let kinds = if enhancement_moves_first {
        [cfg.kind, EnhancementKind::Baseline]
    } else {
        [EnhancementKind::Baseline, cfg.kind]
    };
    let episode = play_episode(params, cfg, kinds, weight, seed)?;
    let default_player = if enhancement_moves_first {
        Player::Two
    } else {
        Player::One
    };
    let reward = match episode.winner {
        Some(w) if w == default_player => 1,
        Some(_) => -1,
        None => 0,
    };
    Ok((episode, reward))
}

/// Plays `n` games between two networks with default search, each side
/// first in half of them. The first `T′` plies are sampled so the games
/// differ.
pub fn gate_model<F: Scalar>(
    old: &ModelParams<F>,
    new: &ModelParams<F>,
    cfg: &LoopConfig,
    seed: u64,
) -> Result<GateResult, SelfPlayError> {
    let n = cfg.gating_games;
    let outcomes = (0..n)
        .into_par_iter()
        .map(|g| {
            let new_first = g < n / 2;
            let game_seed = derive_seed(seed, "gate", &[g as u64]);
            play_arena_game(old, new, cfg, new_first, game_seed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let new_wins = outcomes.iter().filter(|&&o| o > 0).count();
    let old_wins = outcomes.iter().filter(|&&o| o < 0).count();
    let draws = n - new_wins - old_wins;
    Ok(GateResult::decide(new_wins, old_wins, draws, cfg.update_threshold))
}

/// Returns +1 if `new` wins, −1 if `old` wins, 0 for a draw.
fn play_arena_game<F: Scalar>(
    old: &ModelParams<F>,
    new: &ModelParams<F>,
    cfg: &LoopConfig,
    new_first: bool,
    seed: u64,
) -> Result<i8, SelfPlayError> {
    let (first, second) = if new_first { (new, old) } else { (old, new) };
    let evals = [CachedEvaluator::new(first), CachedEvaluator::new(second)];
    let mut searchers = [
        Mcts::new(cfg.search::<F>(EnhancementKind::Baseline, 0.0, derive_seed(seed, "search", &[0])))?,
        Mcts::new(cfg.search::<F>(EnhancementKind::Baseline, 0.0, derive_seed(seed, "search", &[1])))?,
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
    let first_value = match state.terminal_value() {
        Some(o) => o.value_for(Player::One),
        None => 0,
    };
    Ok(if new_first { first_value } else { -first_value })
}

/// Everything a training run carries between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingState<F> {
    pub params: ModelParams<F>,
    pub buffer: ReplayBuffer<F>,
    pub switch: SwitchState,
    /// Number of completed iterations.
    pub iteration: usize,
    pub logs: Vec<IterationLog>,
}

impl<F: Scalar> TrainingState<F> {
    pub fn new(params: ModelParams<F>, cfg: &LoopConfig) -> Self {
        TrainingState {
            params,
            buffer: ReplayBuffer::new(cfg.buffer_iterations),
            switch: SwitchState::default(),
            iteration: 0,
            logs: Vec::new(),
        }
    }
}

/// Examples generated by one iteration before training.
#[derive(Debug, Clone)]
pub struct IterationData<F> {
    pub episodes: Vec<Episode<F>>,
    pub search: EnhancementKind,
    pub r_mcts: Option<i64>,
}

/// Self-play stage of iteration `i` under the loop's mode.
pub fn generate_episodes<F: Scalar>(
    state: &TrainingState<F>,
    cfg: &LoopConfig,
    i: usize,
) -> Result<IterationData<F>, SelfPlayError> {
    let weight = cfg.weight_policy.weight(i);
    let seed_of = |e: usize| derive_seed(cfg.seed, "selfplay", &[i as u64, e as u64]);
    let params = &state.params;
    let arena = cfg.mode == Mode::Adaptive && !state.switch.switched;
    if arena {
        let half = cfg.episodes / 2;
        let results = (0..cfg.episodes)
            .into_par_iter()
            .map(|e| run_episode_mixed(params, cfg, e < half, weight, seed_of(e)))
            .collect::<Result<Vec<_>, _>>()?;
        let r_mcts = results.iter().map(|(_, r)| r).sum();
        return Ok(IterationData {
            episodes: results.into_iter().map(|(ep, _)| ep).collect(),
            search: cfg.kind,
            r_mcts: Some(r_mcts),
        });
    }
    let kind = match cfg.mode {
        Mode::Fixed if i <= cfg.warmstart_iterations => cfg.kind,
        _ => EnhancementKind::Baseline,
    };
    let episodes = (0..cfg.episodes)
        .into_par_iter()
        .map(|e| run_episode_selfplay(params, cfg, kind, weight, seed_of(e)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(IterationData {
        episodes,
        search: kind,
        r_mcts: None,
    })
}

/// One full iteration: self-play (or arena), training on the buffer, and
/// gating. On error `state` is left untouched.
pub fn run_iteration<F: Scalar>(
    state: &mut TrainingState<F>,
    cfg: &LoopConfig,
) -> Result<(), SelfPlayError> {
    cfg.validate()?;
    let i = state.iteration + 1;
    let data = generate_episodes(state, cfg, i)?;

    let mut switch = state.switch.clone();
    if let Some(r) = data.r_mcts {
        switch.r_mcts = r;
        if r > 0 && !switch.switched {
            switch.switched = true;
            switch.switch_iteration = Some(i);
        }
    }

    let examples: Vec<TrainingExample<F>> = data
        .episodes
        .iter()
        .flat_map(|ep| ep.examples.iter().cloned())
        .collect();
    let example_count = examples.len();
    let mut buffer = state.buffer.clone();
    buffer.push(i, examples);

    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, "train", &[i as u64]),
        ..cfg.train
    };
    let (candidate, report) = train(&state.params, &buffer, &train_cfg)?;
    let gate = gate_model(
        &state.params,
        &candidate,
        cfg,
        derive_seed(cfg.seed, "gating", &[i as u64]),
    )?;
    log::info!(
        "iteration {i}: {} episodes, {example_count} examples, search {}, r_mcts {:?}, gate {}/{}/{} {}",
        data.episodes.len(),
        data.search,
        data.r_mcts,
        gate.new_wins,
        gate.old_wins,
        gate.draws,
        if gate.accepted { "accepted" } else { "rejected" },
    );

    if gate.accepted {
        state.params = candidate;
    }
    state.buffer = buffer;
    // the balance is per-iteration; it restarts at every boundary
    switch.r_mcts = 0;
    state.switch = switch;
    state.iteration = i;
    state.logs.push(IterationLog {
        iteration: i,
        episodes: data.episodes.len(),
        examples: example_count,
        search: data.search.name().to_string(),
        r_mcts: data.r_mcts,
        final_loss: report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        gate,
    });
    Ok(())
}
