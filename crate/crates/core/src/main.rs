use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use warmstart::harness::{self, HarnessError, Preset, RunConfig};
use warmstart::neural::load_checkpoint;
use warmstart::selfplay::Mode;
use warmstart::{EnhancementKind, GameId, GameState, Player};

#[derive(Parser, Debug)]
#[command(name = "warmstart", version, about = "Warm-start self-play training for small board games")]
struct Cli {
    /// JSON run configuration (keys as in the parameter table).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Experiment preset: table2, fig1 or fig3.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    game: Option<GameId>,
    /// Override any config key, e.g. `--set m=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train (or resume) a run.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: Option<Mode>,
        #[arg(long)]
        kind: Option<EnhancementKind>,
        /// Number of iterations (I).
        #[arg(long)]
        iters: Option<usize>,
        /// Fixed warm-start length (I_prime).
        #[arg(long)]
        iprime: Option<usize>,
    },
    /// Untrained-network winrate matrix between default search and enhancements.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated enhancement kinds (default: all five).
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<EnhancementKind>,
        /// Games per pair.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Round robin and Elo fit over final models.
    Tournament {
        #[command(flatten)]
        common: Common,
        /// Run directories or checkpoint files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        games_per_pair: Option<usize>,
    },
    /// Play against a checkpoint in the terminal.
    Play {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Let the agent move first.
        #[arg(long)]
        second: bool,
    },
    /// Plot data and switch summary from run directories.
    Export {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

fn resolve(cli: &Cli, common: &Common) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(preset) = common.preset {
        cfg.apply_preset(preset);
    }
    if let Some(game) = common.game {
        cfg.game = game;
    }
    for s in &common.set {
        cfg.set(s)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(HarnessError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Run(e.to_string()))?;
    }
    match &cli.command {
        Command::Train {
            common,
            mode,
            kind,
            iters,
            iprime,
        } => {
            let mut cfg = resolve(&cli, common)?;
            if let Some(m) = mode {
                cfg.mode = *m;
            }
            if let Some(k) = kind {
                cfg.kind = *k;
            }
            if let Some(i) = iters {
                cfg.iterations = *i;
            }
            if let Some(i) = iprime {
                cfg.warmstart_iterations = *i;
            }
            let summary = harness::train_run(&cfg)?;
            println!(
                "{}: {} iterations, switch iteration {}",
                summary.dir.root.display(),
                summary.completed,
                summary
                    .switch
                    .switch_iteration
                    .map(|i| i.to_string())
                    .unwrap_or_else(|| "none".into())
            );
        }
        Command::Compare {
            common,
            kinds,
            repetitions,
        } => {
            let mut cfg = resolve(&cli, common)?;
            if let Some(r) = repetitions {
                cfg.repetitions = *r;
            }
            let kinds = if kinds.is_empty() {
                EnhancementKind::ENHANCEMENTS.to_vec()
            } else {
                kinds.clone()
            };
            let results = harness::compare(&cfg, &kinds)?;
            for r in &results {
                println!(
                    "{} vs {}: {}-{}-{} ({:.1}%)",
                    r.player_a,
                    r.player_b,
                    r.wins_a,
                    r.wins_b,
                    r.draws,
                    100.0 * r.score_a()
                );
            }
        }
        Command::Tournament {
            common,
            inputs,
            games_per_pair,
        } => {
            let mut cfg = resolve(&cli, common)?;
            if let Some(g) = games_per_pair {
                cfg.games_per_pair = *g;
            }
            let summary = harness::tournament(&cfg, inputs)?;
            for (id, rating) in &summary.elo.ratings {
                println!("{id}: {rating:.1}");
            }
        }
        Command::Play {
            common,
            checkpoint,
            second,
        } => {
            let cfg = resolve(&cli, common)?;
            cfg.validate()?;
            let (params, _) = load_checkpoint::<f32>(checkpoint)?;
            let human = if *second { Player::Two } else { Player::One };
            let start = GameState::initial_with_win_length(cfg.game, cfg.resolved_win_length());
            let stdin = io::stdin();
            let stdout = io::stdout();
            harness::play_session(&params, start, cfg.m, human, cfg.seed, stdin.lock(), stdout.lock())?;
        }
        Command::Export { runs } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            harness::export(&out, runs)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
