//! Experiment orchestration: run configuration, resumable training runs,
//! the comparison matrix, tournaments, plot exports and terminal play.

mod config;
mod play;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{Preset, RunConfig};
pub use play::{parse_move, play_session, render};

use crate::evaluation::{
    fit_elo, round_robin, write_adaptive_vs_fixed_csv, write_elo_csv, write_fixed_iprime_csv, write_results_csv,
    write_reward_balance_csv, Agent, EloOptions, EloTable, EvaluationError, MatchResult, Network,
};
use crate::game::GameError;
use crate::neural::{load_checkpoint, read_examples, save_checkpoint, write_examples, ModelParams, NeuralError};
use crate::search::{EnhancementKind, SearchError};
use crate::seeds::derive_seed;
use crate::selfplay::{run_iteration, IterationLog, Mode, SelfPlayError, SwitchState, TrainingState};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
    #[error(transparent)]
    SelfPlay(#[from] SelfPlayError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::SelfPlay(SelfPlayError::InvalidConfig(_)) => 2,
            _ => 3,
        }
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Written before the first iteration and refreshed after each one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub config_hash: String,
    pub code_version: String,
    /// Keys whose values differ from the defaults.
    pub overrides: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
    /// Per-iteration log files, relative to the run directory.
    pub iterations: Vec<String>,
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        RunManifest {
            config: config.clone(),
            config_hash: config.hash(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            overrides: overrides(config),
            started_unix: now_unix(),
            finished_unix: None,
            iterations: Vec::new(),
        }
    }
}

fn overrides(config: &RunConfig) -> Vec<String> {
    let ours = serde_json::to_value(config).expect("config serializes");
    let defaults = serde_json::to_value(RunConfig::default()).expect("config serializes");
    let (Some(ours), Some(defaults)) = (ours.as_object(), defaults.as_object()) else {
        return Vec::new();
    };
    ours.iter()
        .filter(|(k, v)| defaults.get(*k) != Some(v))
        .map(|(k, _)| k.clone())
        .collect()
}

/// Record committed alongside each iteration's checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IterationRecord {
    log: IterationLog,
    switch: SwitchState,
}

/// File layout of one training run.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn checkpoint(&self, k: usize) -> PathBuf {
        self.root.join("checkpoints").join(format!("iter_{k}.json"))
    }

    pub fn buffer(&self, k: usize) -> PathBuf {
        self.root.join("buffer").join(format!("iter_{k}.examples"))
    }

    fn record(&self, k: usize) -> PathBuf {
        self.root.join("log").join(format!("iter_{k}.json"))
    }

    pub fn iterations_csv(&self) -> PathBuf {
        self.root.join("log").join("iterations.csv")
    }

    pub fn switch_json(&self) -> PathBuf {
        self.root.join("log").join("switch.json")
    }

    /// Highest `k` such that iterations `1..=k` are all committed.
    pub fn completed(&self) -> usize {
        let mut k = 0;
        while self.checkpoint(k + 1).exists() && self.record(k + 1).exists() {
            k += 1;
        }
        k
    }

    pub fn read_manifest(&self) -> Result<RunManifest, HarnessError> {
        let path = self.manifest();
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::Run(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Run(format!("{}: {e}", path.display())))
    }

    /// Iteration logs `1..=completed()`.
    pub fn logs(&self) -> Result<Vec<IterationLog>, HarnessError> {
        (1..=self.completed())
            .map(|k| self.read_record(k).map(|r| r.log))
            .collect()
    }

    fn read_record(&self, k: usize) -> Result<IterationRecord, HarnessError> {
        let path = self.record(k);
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Run(format!("{}: {e}", path.display())))
    }

    /// Path of the last committed checkpoint.
    pub fn final_checkpoint(&self) -> Option<PathBuf> {
        match self.completed() {
            0 => None,
            k => Some(self.checkpoint(k)),
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    write_atomic(path, text.as_bytes())
}

/// Outcome of `train_run`.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub dir: RunDir,
    pub completed: usize,
    pub switch: SwitchState,
    pub logs: Vec<IterationLog>,
}

/// Runs (or resumes) the training loop described by `cfg` in `cfg.out`.
pub fn train_run(cfg: &RunConfig) -> Result<TrainSummary, HarnessError> {
    train_run_until(cfg, |_| false)
}

/// Like `train_run`, but stops early once `stop` returns true after an
/// iteration. The run stays resumable.
pub fn train_run_until(
    cfg: &RunConfig,
    mut stop: impl FnMut(&TrainingState<f32>) -> bool,
) -> Result<TrainSummary, HarnessError> {
    cfg.validate()?;
    let dir = RunDir::new(&cfg.out);
    let loop_cfg = cfg.loop_config();
    loop_cfg.validate()?;

    let mut manifest = if dir.manifest().exists() {
        let existing = dir.read_manifest()?;
        if existing.config_hash != cfg.hash() {
            return Err(HarnessError::Config(format!(
                "{} holds a run with a different configuration (hash {})",
                dir.root.display(),
                existing.config_hash
            )));
        }
        existing
    } else {
        let m = RunManifest::new(cfg);
        write_json(&dir.manifest(), &m)?;
        m
    };

    let mut state = resume_state(&dir, cfg)?;
    if state.iteration > 0 {
        log::info!("resuming {} after iteration {}", dir.root.display(), state.iteration);
    }
    while state.iteration < cfg.iterations {
        run_iteration(&mut state, &loop_cfg)?;
        commit_iteration(&dir, &state, &mut manifest)?;
        if stop(&state) {
            break;
        }
    }
    if state.iteration == cfg.iterations {
        manifest.finished_unix = Some(now_unix());
        write_json(&dir.manifest(), &manifest)?;
    }
    Ok(TrainSummary {
        completed: state.iteration,
        switch: state.switch.clone(),
        logs: state.logs.clone(),
        dir,
    })
}

fn initial_params(cfg: &RunConfig) -> ModelParams<f32> {
    ModelParams::init(cfg.architecture(), derive_seed(cfg.seed, "init", &[]))
}

fn resume_state(dir: &RunDir, cfg: &RunConfig) -> Result<TrainingState<f32>, HarnessError> {
    let loop_cfg = cfg.loop_config();
    let k = dir.completed();
    let mut state = TrainingState::new(initial_params(cfg), &loop_cfg);
    if k == 0 {
        return Ok(state);
    }
    let (params, iteration) = load_checkpoint::<f32>(&dir.checkpoint(k))?;
    if iteration != k {
        return Err(HarnessError::Run(format!(
            "{} claims iteration {iteration}",
            dir.checkpoint(k).display()
        )));
    }
    state.params = params;
    for j in k.saturating_sub(cfg.rs - 1).max(1)..=k {
        let path = dir.buffer(j);
        let file = fs::File::open(&path).map_err(|e| HarnessError::Run(format!("{}: {e}", path.display())))?;
        let examples = read_examples(std::io::BufReader::new(file))
            .map_err(|e| HarnessError::Run(format!("{}: {e}", path.display())))?;
        state.buffer.push(j, examples);
    }
    state.logs = dir.logs()?;
    state.switch = dir.read_record(k)?.switch;
    state.iteration = k;
    Ok(state)
}

fn commit_iteration(
    dir: &RunDir,
    state: &TrainingState<f32>,
    manifest: &mut RunManifest,
) -> Result<(), HarnessError> {
    let k = state.iteration;
    let examples = state.buffer.iteration(k).unwrap_or(&[]);
    let mut bytes = Vec::new();
    write_examples(&mut bytes, examples)?;
    write_atomic(&dir.buffer(k), &bytes)?;

    let log = state.logs.last().cloned().expect("iteration logged");
    let record = IterationRecord {
        log,
        switch: state.switch.clone(),
    };
    write_json(&dir.record(k), &record)?;
    // the checkpoint commits the iteration
    save_checkpoint(&dir.checkpoint(k), &state.params, k)?;

    write_json(&dir.switch_json(), &state.switch)?;
    let mut csv = String::from(IterationLog::CSV_HEADER);
    csv.push('\n');
    for l in &state.logs {
        csv.push_str(&l.csv_row());
        csv.push('\n');
    }
    write_atomic(&dir.iterations_csv(), csv.as_bytes())?;
    manifest.iterations = (1..=k).map(|j| format!("log/iter_{j}.json")).collect();
    write_json(&dir.manifest(), manifest)?;
    Ok(())
}

/// Untrained-network matrix between default search and `kinds`, argmax
/// play and blend weight ½. Writes `results.csv` into `cfg.out`.
pub fn compare(cfg: &RunConfig, kinds: &[EnhancementKind]) -> Result<Vec<MatchResult>, HarnessError> {
    cfg.validate()?;
    let mut players = vec![EnhancementKind::Baseline];
    players.extend(kinds.iter().copied().filter(|k| *k != EnhancementKind::Baseline));
    let agents: Vec<Agent<f32>> = players
        .iter()
        .map(|&kind| Agent {
            id: kind.name().to_string(),
            kind,
            weight: 0.5,
            network: Network::Untrained(cfg.architecture()),
        })
        .collect();
    let match_cfg = cfg.match_config();
    let results = round_robin(&agents, cfg.repetitions, &match_cfg, derive_seed(cfg.seed, "compare", &[]))?;
    fs::create_dir_all(&cfg.out)?;
    let file = fs::File::create(cfg.out.join("results.csv"))?;
    write_results_csv(BufWriter::new(file), &results)?;
    Ok(results)
}

/// One tournament entrant: a run directory or a bare checkpoint file.
#[derive(Debug, Clone)]
pub struct Entrant {
    pub id: String,
    pub checkpoint: PathBuf,
    /// Present when the entrant is a run directory.
    pub manifest: Option<RunManifest>,
    pub run: Option<RunDir>,
}

impl Entrant {
    pub fn open(path: &Path) -> Result<Self, HarnessError> {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        if path.is_dir() {
            let run = RunDir::new(path);
            let checkpoint = run.final_checkpoint().ok_or_else(|| {
                HarnessError::Run(format!("{}: no committed checkpoint", path.display()))
            })?;
            let manifest = run.read_manifest().ok();
            Ok(Entrant {
                id: stem,
                checkpoint,
                manifest,
                run: Some(run),
            })
        } else if path.is_file() {
            Ok(Entrant {
                id: stem,
                checkpoint: path.to_path_buf(),
                manifest: None,
                run: None,
            })
        } else {
            Err(HarnessError::Run(format!("{}: no such checkpoint or run directory", path.display())))
        }
    }
}

/// Results of `tournament`.
#[derive(Debug, Clone)]
pub struct TournamentSummary {
    pub results: Vec<MatchResult>,
    pub elo: EloTable,
}

/// Round robin between final models with default search and argmax play,
/// then the Elo fit. Writes `results.csv`, `elo.csv` and the plot exports.
pub fn tournament(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<TournamentSummary, HarnessError> {
    cfg.validate()?;
    if inputs.len() < 2 {
        return Err(HarnessError::Config("tournament needs at least two checkpoints".into()));
    }
    let mut entrants = inputs.iter().map(|p| Entrant::open(p)).collect::<Result<Vec<_>, _>>()?;
    // keep ids unique when directories share a name
    for i in 0..entrants.len() {
        if entrants[..i].iter().any(|e| e.id == entrants[i].id) {
            entrants[i].id = format!("{}_{i}", entrants[i].id);
        }
    }
    let mut agents = Vec::new();
    for e in &entrants {
        let (params, _) = load_checkpoint::<f32>(&e.checkpoint)?;
        if params.arch.actions != cfg.game.action_size() {
            return Err(HarnessError::Run(format!(
                "{}: network has {} actions, {} needs {}",
                e.checkpoint.display(),
                params.arch.actions,
                cfg.game,
                cfg.game.action_size()
            )));
        }
        agents.push(Agent {
            id: e.id.clone(),
            kind: EnhancementKind::Baseline,
            weight: 0.0,
            network: Network::Fixed(Arc::new(params)),
        });
    }
    let match_cfg = cfg.match_config();
    let results = round_robin(&agents, cfg.games_per_pair, &match_cfg, derive_seed(cfg.seed, "tournament", &[]))?;
    let elo = fit_elo(&results, &EloOptions::default())?.table;

    fs::create_dir_all(&cfg.out)?;
    write_results_csv(BufWriter::new(fs::File::create(cfg.out.join("results.csv"))?), &results)?;
    write_elo_csv(BufWriter::new(fs::File::create(cfg.out.join("elo.csv"))?), &elo)?;

    let rating = |e: &Entrant| elo.rating(&e.id).unwrap_or(f64::NAN);
    let with_manifest: Vec<(&Entrant, &RunManifest)> =
        entrants.iter().filter_map(|e| e.manifest.as_ref().map(|m| (e, m))).collect();
    let fixed_rows: Vec<_> = with_manifest
        .iter()
        .filter(|(_, m)| m.config.mode == Mode::Fixed)
        .map(|(e, m)| (m.config.kind, m.config.warmstart_iterations, rating(e)))
        .collect();
    write_fixed_iprime_csv(
        BufWriter::new(fs::File::create(cfg.out.join("fig_fixed_iprime.csv"))?),
        &fixed_rows,
    )?;
    let mode_rows: Vec<_> = with_manifest
        .iter()
        .map(|(e, m)| (m.config.kind, m.config.mode.name().to_string(), rating(e)))
        .collect();
    write_adaptive_vs_fixed_csv(
        BufWriter::new(fs::File::create(cfg.out.join("fig_adaptive_vs_fixed.csv"))?),
        &mode_rows,
    )?;
    let runs: Vec<(String, RunDir)> = entrants
        .iter()
        .filter_map(|e| e.run.clone().map(|r| (e.id.clone(), r)))
        .collect();
    write_reward_balance(&cfg.out, &runs)?;
    Ok(TournamentSummary { results, elo })
}

fn write_reward_balance(out: &Path, runs: &[(String, RunDir)]) -> Result<(), HarnessError> {
    let mut rows = Vec::new();
    for (id, run) in runs {
        for log in run.logs()? {
            if let Some(r) = log.r_mcts {
                rows.push((id.clone(), log.iteration, r));
            }
        }
    }
    write_reward_balance_csv(BufWriter::new(fs::File::create(out.join("fig_reward_balance.csv"))?), &rows)?;
    Ok(())
}

/// Writes `fig_reward_balance.csv` and `switch.csv` (one row per run) for
/// the given run directories.
pub fn export(out: &Path, runs: &[PathBuf]) -> Result<(), HarnessError> {
    if runs.is_empty() {
        return Err(HarnessError::Config("export needs at least one run directory".into()));
    }
    let mut named = Vec::new();
    let mut switch_csv = String::from("run,game,kind,mode,completed,switch_iteration\n");
    for path in runs {
        let run = RunDir::new(path);
        let manifest = run.read_manifest()?;
        let id = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let completed = run.completed();
        let switch = if completed > 0 {
            run.read_record(completed)?.switch
        } else {
            SwitchState::default()
        };
        switch_csv.push_str(&format!(
            "{id},{},{},{},{completed},{}\n",
            manifest.config.game,
            manifest.config.kind,
            manifest.config.mode.name(),
            switch.switch_iteration.map(|i| i.to_string()).unwrap_or_default()
        ));
        named.push((id, run));
    }
    fs::create_dir_all(out)?;
    write_reward_balance(out, &named)?;
    fs::write(out.join("switch.csv"), switch_csv)?;
    Ok(())
}
