use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::evaluation::MatchConfig;
use crate::game::GameId;
use crate::neural::{Architecture, Optimizer, TrainConfig};
use crate::search::EnhancementKind;
use crate::selfplay::{LoopConfig, Mode, WeightPolicy};

/// Flat run configuration. Keys follow the short parameter names, so a
/// manifest with no overrides reads exactly like the default table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Training iterations.
    #[serde(rename = "I")]
    pub iterations: usize,
    /// Iterations of examples kept for retraining.
    pub rs: usize,
    /// Training epochs per iteration.
    pub ep: usize,
    /// Episodes per iteration.
    #[serde(rename = "E")]
    pub episodes: usize,
    pub bs: usize,
    /// Plies sampled from π before argmax play.
    #[serde(rename = "T_prime")]
    pub exploration_steps: usize,
    pub lr: f64,
    /// Simulations per move.
    pub m: usize,
    /// Dropout probability.
    pub d: f64,
    pub c: f64,
    /// Gating games.
    pub n: usize,
    /// Gating threshold.
    pub u: f64,
    pub game: GameId,
    pub kind: EnhancementKind,
    pub mode: Mode,
    #[serde(rename = "I_prime")]
    pub warmstart_iterations: usize,
    pub weight_policy: WeightPolicy,
    pub seed: u64,
    pub out: PathBuf,
    /// Games per pair in `compare`.
    pub repetitions: usize,
    /// Games per pair in `tournament`.
    pub games_per_pair: usize,
    pub channels: usize,
    pub hidden: usize,
    pub optimizer: Optimizer,
    /// In-a-row target for Connect Four and Gobang; `null` keeps the game's own.
    pub win_length: Option<u8>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            iterations: 100,
            rs: 20,
            ep: 10,
            episodes: 50,
            bs: 64,
            exploration_steps: 15,
            lr: 0.005,
            m: 100,
            d: 0.3,
            c: 1.0,
            n: 40,
            u: 0.6,
            game: GameId::ConnectFour,
            kind: EnhancementKind::Wrora,
            mode: Mode::Adaptive,
            warmstart_iterations: 5,
            weight_policy: WeightPolicy::OneOverI,
            seed: 0,
            out: PathBuf::from("runs/default"),
            repetitions: 100,
            games_per_pair: 20,
            channels: 32,
            hidden: 256,
            optimizer: Optimizer::Sgd,
            win_length: None,
        }
    }
}

/// Settings pinned for each of the three experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Untrained head-to-head matrix: argmax play, blend weight ½.
    Table2,
    /// Fixed warm-start length sweep on Connect Four.
    Fig1,
    /// Adaptive training and the adaptive-vs-fixed tournament.
    Fig3,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table2" => Ok(Preset::Table2),
            "fig1" => Ok(Preset::Fig1),
            "fig3" => Ok(Preset::Fig3),
            _ => Err(format!("unknown preset '{s}' (table2, fig1, fig3)")),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Stable digest of the resolved settings. The output directory is left
    /// out so a run can be moved.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("out");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        let defaults = RunConfig::default();
        match preset {
            Preset::Table2 => {
                self.m = defaults.m;
                self.exploration_steps = 0;
                self.weight_policy = WeightPolicy::Half;
                self.repetitions = 100;
            }
            Preset::Fig1 => {
                self.game = GameId::ConnectFour;
                self.mode = Mode::Fixed;
                self.weight_policy = WeightPolicy::OneOverI;
                self.iterations = defaults.iterations;
            }
            Preset::Fig3 => {
                self.mode = Mode::Adaptive;
                self.weight_policy = WeightPolicy::OneOverI;
                self.iterations = defaults.iterations;
                self.games_per_pair = 20;
            }
        }
    }

    /// Applies `key=value` using the JSON key names.
    pub fn set(&mut self, assignment: &str) -> Result<(), HarnessError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("expected KEY=VALUE, got '{assignment}'")))?;
        let mut value = serde_json::to_value(&*self).expect("config serializes");
        let map = value.as_object_mut().expect("config is an object");
        if !map.contains_key(key) {
            return Err(HarnessError::Config(format!("unknown field '{key}'")));
        }
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        map.insert(key.to_string(), parsed);
        *self = serde_json::from_value(value).map_err(|e| HarnessError::Config(format!("field '{key}': {e}")))?;
        Ok(())
    }

    /// Field-level checks; the message names the offending key.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |field: &str, why: &str| Err(HarnessError::Config(format!("{field}: {why}")));
        if self.iterations == 0 {
            return fail("I", "must be at least 1");
        }
        if self.rs == 0 {
            return fail("rs", "must be at least 1");
        }
        if self.ep == 0 {
            return fail("ep", "must be at least 1");
        }
        if self.episodes == 0 || self.episodes % 2 != 0 {
            return fail("E", "must be a positive even number");
        }
        if self.bs == 0 {
            return fail("bs", "must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail("lr", "must be a non-negative number");
        }
        if self.m == 0 {
            return fail("m", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.d) {
            return fail("d", "must lie in [0, 1)");
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return fail("c", "must be a non-negative number");
        }
        if self.n == 0 || self.n % 2 != 0 {
            return fail("n", "must be a positive even number");
        }
        if !(self.u > 0.5 && self.u <= 1.0) {
            return fail("u", "must lie in (0.5, 1]");
        }
        if self.mode == Mode::Fixed && self.warmstart_iterations >= self.iterations {
            return fail("I_prime", "must be smaller than I");
        }
        if self.repetitions == 0 || self.repetitions % 2 != 0 {
            return fail("repetitions", "must be a positive even number");
        }
        if self.games_per_pair == 0 || self.games_per_pair % 2 != 0 {
            return fail("games_per_pair", "must be a positive even number");
        }
        if self.channels == 0 || self.hidden == 0 {
            return fail("channels/hidden", "must be at least 1");
        }
        if let Some(k) = self.win_length {
            if self.game == GameId::Othello {
                return fail("win_length", "does not apply to othello");
            }
            if !(3..=6).contains(&k) {
                return fail("win_length", "must lie in 3..=6");
            }
        }
        Ok(())
    }

    pub fn resolved_win_length(&self) -> u8 {
        self.win_length.unwrap_or_else(|| self.game.default_win_length())
    }

    pub fn match_config(&self) -> MatchConfig {
        MatchConfig {
            game: self.game,
            win_length: self.resolved_win_length(),
            simulations: self.m,
            c: self.c,
            exploration_steps: 0,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            channels: self.channels,
            hidden: self.hidden,
            dropout: self.d,
            ..Architecture::for_game(self.game)
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            game: self.game,
            win_length: self.resolved_win_length(),
            iterations: self.iterations,
            warmstart_iterations: self.warmstart_iterations,
            episodes: self.episodes,
            exploration_steps: self.exploration_steps,
            gating_games: self.n,
            update_threshold: self.u,
            kind: self.kind,
            mode: self.mode,
            weight_policy: self.weight_policy,
            simulations: self.m,
            c: self.c,
            buffer_iterations: self.rs,
            train: TrainConfig {
                epochs: self.ep,
                batch_size: self.bs,
                learning_rate: self.lr,
                dropout: self.d,
                optimizer: self.optimizer,
                seed: 0,
            },
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_parameter_table() {
        let json: serde_json::Value = serde_json::from_str(&RunConfig::default().to_json()).unwrap();
        let expect = [
            ("I", 100.0),
            ("rs", 20.0),
            ("ep", 10.0),
            ("E", 50.0),
            ("bs", 64.0),
            ("T_prime", 15.0),
            ("lr", 0.005),
            ("m", 100.0),
            ("d", 0.3),
            ("c", 1.0),
            ("n", 40.0),
            ("u", 0.6),
        ];
        for (key, value) in expect {
            assert_eq!(json[key].as_f64(), Some(value), "{key}");
        }
    }

    #[test]
    fn partial_file_and_overrides() {
        let mut cfg = RunConfig::from_json(r#"{"E": 4, "game": "othello"}"#).unwrap();
        assert_eq!(cfg.episodes, 4);
        assert_eq!(cfg.game, GameId::Othello);
        assert_eq!(cfg.m, 100);
        cfg.set("m=12").unwrap();
        cfg.set("kind=rave").unwrap();
        assert_eq!((cfg.m, cfg.kind), (12, EnhancementKind::Rave));
        assert!(cfg.set("bogus=1").is_err());
        assert!(cfg.set("m=-3").is_err());
        assert!(RunConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn win_length_override_reaches_the_loops() {
        let mut cfg = RunConfig { game: GameId::Gobang, ..RunConfig::default() };
        assert_eq!(cfg.loop_config().win_length, 5);
        cfg.set("win_length=4").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.loop_config().win_length, 4);
        assert_eq!(cfg.match_config().win_length, 4);
    }

    #[test]
    fn validation_names_the_field() {
        for (field, cfg) in [
            ("repetitions", RunConfig { repetitions: 0, ..RunConfig::default() }),
            ("E", RunConfig { episodes: 3, ..RunConfig::default() }),
            ("u", RunConfig { u: 0.4, ..RunConfig::default() }),
            ("win_length", RunConfig { win_length: Some(7), ..RunConfig::default() }),
            (
                "win_length",
                RunConfig { win_length: Some(4), game: GameId::Othello, ..RunConfig::default() },
            ),
        ] {
            let err = cfg.validate().unwrap_err().to_string();
            assert!(err.contains(field), "{err}");
        }
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = RunConfig::default();
        let b = RunConfig { out: "elsewhere".into(), ..a.clone() };
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn presets_pin_settings() {
        let mut cfg = RunConfig { m: 7, ..RunConfig::default() };
        cfg.apply_preset(Preset::Table2);
        assert_eq!((cfg.m, cfg.exploration_steps, cfg.weight_policy), (100, 0, WeightPolicy::Half));
        cfg.apply_preset(Preset::Fig1);
        assert_eq!((cfg.mode, cfg.game), (Mode::Fixed, GameId::ConnectFour));
    }
}
