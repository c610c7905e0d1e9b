//! Self-play training with warm-start search enhancements for 6×6 Connect
//! Four, Othello and Gobang.
//!
//! The numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the training pipeline.

pub mod evaluation;
pub mod game;
pub mod harness;
pub mod neural;
pub mod scalar;
pub mod search;
pub mod seeds;
pub mod selfplay;

pub use game::{initial_state, GameError, GameId, GameState, Move, Outcome, Player};
pub use scalar::Scalar;
pub use search::{CachedEvaluator, EnhancementKind, Evaluator, PolicyVector, SearchError};

/// Tree search at training precision.
pub type Mcts = search::Mcts<f32>;
pub type SearchConfig = search::SearchConfig<f32>;
pub type ModelParams = neural::ModelParams<f32>;
