//! Policy/value network written from scratch: two 3×3 convolution layers, a
//! shared dense layer with dropout, a softmax policy head and a tanh value head.

mod buffer;
mod checkpoint;
mod gradcheck;
mod train;

pub use buffer::{read_examples, write_examples, ReplayBuffer, TrainingExample};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::{gradient_check, gradient_check_against, GradCheckReport};
pub use train::{train, Optimizer, TrainConfig, TrainReport};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{GameId, GameState, BOARD_SIDE};
use crate::scalar::{axpy, dot, Scalar};
use crate::search::{Evaluation, Evaluator, SearchError};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("input has {got} values, network expects {expected}")]
    InputShape { got: usize, expected: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("example file error: {0}")]
    Examples(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Layer sizes; fully determines every parameter shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub board: usize,
    pub channels: usize,
    pub hidden: usize,
    pub actions: usize,
    pub dropout: f64,
}

impl Architecture {
    pub fn for_game(game: GameId) -> Self {
        Architecture {
            board: BOARD_SIDE,
            channels: 32,
            hidden: 256,
            actions: game.action_size(),
            dropout: 0.3,
        }
    }

    pub fn cells(&self) -> usize {
        self.board * self.board
    }

    pub fn tensor_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (c, h, a) = (self.channels, self.hidden, self.actions);
        vec![
            ("conv1_w", vec![c, 1, 3, 3]),
            ("conv1_b", vec![c]),
            ("conv2_w", vec![c, c, 3, 3]),
            ("conv2_b", vec![c]),
            ("dense_w", vec![h, c * self.cells()]),
            ("dense_b", vec![h]),
            ("policy_w", vec![a, h]),
            ("policy_b", vec![a]),
            ("value_w", vec![h]),
            ("value_b", vec![1]),
        ]
    }

    fn fan_in(&self, tensor: usize) -> usize {
        match tensor {
            0 | 1 => 9,
            2 | 3 => 9 * self.channels,
            4 | 5 => self.channels * self.cells(),
            _ => self.hidden,
        }
    }
}

pub(crate) const CONV1_W: usize = 0;
pub(crate) const CONV1_B: usize = 1;
pub(crate) const CONV2_W: usize = 2;
pub(crate) const CONV2_B: usize = 3;
pub(crate) const DENSE_W: usize = 4;
pub(crate) const DENSE_B: usize = 5;
pub(crate) const POLICY_W: usize = 6;
pub(crate) const POLICY_B: usize = 7;
pub(crate) const VALUE_W: usize = 8;
pub(crate) const VALUE_B: usize = 9;

/// Network weights: one flat array per tensor in `Architecture::tensor_shapes` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub arch: Architecture,
    pub tensors: Vec<Vec<F>>,
}

impl<F: Scalar> ModelParams<F> {
    /// Weights uniform in `±√(3 / fan_in)`, biases zero. Deterministic per seed.
    pub fn init(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = arch
            .tensor_shapes()
            .iter()
            .enumerate()
            .map(|(i, (name, shape))| {
                let len: usize = shape.iter().product();
                if name.ends_with("_b") {
                    vec![F::zero(); len]
                } else {
                    let bound = (3.0 / arch.fan_in(i) as f64).sqrt();
                    (0..len)
                        .map(|_| F::of(rng.gen_range(-bound..=bound)))
                        .collect()
                }
            })
            .collect();
        ModelParams { arch, tensors }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            arch: self.arch,
            tensors: self.tensors.iter().map(|t| vec![F::zero(); t.len()]).collect(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(Vec::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }

    /// Converts to another precision.
    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        ModelParams {
            arch: self.arch,
            tensors: self
                .tensors
                .iter()
                .map(|t| t.iter().map(|v| G::of(v.as_f64())).collect())
                .collect(),
        }
    }

    /// Policy over all actions masked to `legal` and renormalized, plus value.
    pub fn predict(&self, x: &[F], legal: u64) -> Result<(Vec<F>, F), NeuralError> {
        let fwd = self.forward(x, None)?;
        let mut policy = fwd.probs;
        let mut sum = F::zero();
        for (a, p) in policy.iter_mut().enumerate() {
            if legal & (1u64 << a) == 0 {
                *p = F::zero();
            } else {
                sum += *p;
            }
        }
        if sum > F::zero() && sum.is_finite() {
            policy.iter_mut().for_each(|p| *p /= sum);
        } else {
            log::warn!("masked policy has no mass; falling back to uniform over legal moves");
            let n = F::of_usize(legal.count_ones() as usize);
            for (a, p) in policy.iter_mut().enumerate() {
                *p = if legal & (1u64 << a) != 0 { F::one() / n } else { F::zero() };
            }
        }
        Ok((policy, fwd.value))
    }

    /// Forward pass. `dropout_mask` holds the per-hidden-unit multiplier
    /// (0 or 1/(1−d)); `None` runs inference.
    pub(crate) fn forward(
        &self,
        x: &[F],
        dropout_mask: Option<&[F]>,
    ) -> Result<Forward<F>, NeuralError> {
        let arch = &self.arch;
        let cells = arch.cells();
        if x.len() != cells {
            return Err(NeuralError::InputShape {
                got: x.len(),
                expected: cells,
            });
        }
        let t = &self.tensors;
        let ch = arch.channels;

        let patches1 = im2col(x, 1, arch.board);
        let h1 = conv_forward(&patches1, &t[CONV1_W], &t[CONV1_B], ch, 9, cells);
        let patches2 = im2col(&h1, ch, arch.board);
        let h2 = conv_forward(&patches2, &t[CONV2_W], &t[CONV2_B], ch, 9 * ch, cells);

        let flat_len = ch * cells;
        let mut h3 = Vec::with_capacity(arch.hidden);
        for h in 0..arch.hidden {
            let w = &t[DENSE_W][h * flat_len..(h + 1) * flat_len];
            h3.push((dot(w, &h2) + t[DENSE_B][h]).activation());
        }
        let h3d: Vec<F> = match dropout_mask {
            Some(mask) => h3.iter().zip(mask).map(|(&a, &m)| a * m).collect(),
            None => h3.clone(),
        };

        let mut logits = Vec::with_capacity(arch.actions);
        for a in 0..arch.actions {
            let w = &t[POLICY_W][a * arch.hidden..(a + 1) * arch.hidden];
            logits.push(dot(w, &h3d) + t[POLICY_B][a]);
        }
        let log_probs = log_softmax(&logits);
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        let value = (dot(&t[VALUE_W], &h3d) + t[VALUE_B][0]).activation();

        Ok(Forward {
            patches1,
            h1,
            patches2,
            h2,
            h3,
            h3d,
            log_probs,
            probs,
            value,
        })
    }

    /// Loss `(z − v)² − π·log p` of one example. Its gradient is added
    /// into `grads`.
    pub fn backward(
        &self,
        ex: &TrainingExample<F>,
        dropout_mask: Option<&[F]>,
        grads: &mut ModelParams<F>,
    ) -> Result<F, NeuralError> {
        let arch = &self.arch;
        let t = &self.tensors;
        let (ch, cells, hidden) = (arch.channels, arch.cells(), arch.hidden);
        let fwd = self.forward(&ex.x, dropout_mask)?;
        let (value_loss, policy_loss) = loss_terms(&fwd.log_probs, fwd.value, &ex.pi, ex.z);

        // value head
        let g_value_pre = -F::of(2.0) * (ex.z - fwd.value) * (F::one() - fwd.value * fwd.value);
        let mut g_h3d = vec![F::zero(); hidden];
        axpy(g_value_pre, &fwd.h3d, &mut grads.tensors[VALUE_W]);
        grads.tensors[VALUE_B][0] += g_value_pre;
        axpy(g_value_pre, &t[VALUE_W], &mut g_h3d);

        // policy head: dL/dlogit = p·Σπ − π
        let pi_sum: F = ex.pi.iter().copied().sum();
        for a in 0..arch.actions {
            let g = fwd.probs[a] * pi_sum - ex.pi[a];
            if g == F::zero() {
                continue;
            }
            let row = a * hidden..(a + 1) * hidden;
            axpy(g, &fwd.h3d, &mut grads.tensors[POLICY_W][row.clone()]);
            grads.tensors[POLICY_B][a] += g;
            axpy(g, &t[POLICY_W][row], &mut g_h3d);
        }

        // dense + dropout
        let flat_len = ch * cells;
        let mut g_flat = vec![F::zero(); flat_len];
        for h in 0..hidden {
            let mut g = g_h3d[h];
            if let Some(mask) = dropout_mask {
                g *= mask[h];
            }
            g *= F::one() - fwd.h3[h] * fwd.h3[h];
            if g == F::zero() {
                continue;
            }
            let row = h * flat_len..(h + 1) * flat_len;
            axpy(g, &fwd.h2, &mut grads.tensors[DENSE_W][row.clone()]);
            grads.tensors[DENSE_B][h] += g;
            axpy(g, &t[DENSE_W][row], &mut g_flat);
        }

        // conv2
        let g_z2: Vec<F> = g_flat
            .iter()
            .zip(&fwd.h2)
            .map(|(&g, &a)| g * (F::one() - a * a))
            .collect();
        let g_patches2 = conv_backward(
            &fwd.patches2,
            &t[CONV2_W],
            &g_z2,
            ch,
            9 * ch,
            cells,
            &mut grads.tensors,
            CONV2_W,
            CONV2_B,
            true,
        );
        let g_h1 = col2im(&g_patches2, ch, arch.board);

        // conv1
        let g_z1: Vec<F> = g_h1
            .iter()
            .zip(&fwd.h1)
            .map(|(&g, &a)| g * (F::one() - a * a))
            .collect();
        conv_backward(
            &fwd.patches1,
            &t[CONV1_W],
            &g_z1,
            ch,
            9,
            cells,
            &mut grads.tensors,
            CONV1_W,
            CONV1_B,
            false,
        );

        Ok(value_loss + policy_loss)
    }

    /// Loss of one example without dropout.
    pub fn loss(&self, ex: &TrainingExample<F>) -> Result<F, NeuralError> {
        let fwd = self.forward(&ex.x, None)?;
        let (v, p) = loss_terms(&fwd.log_probs, fwd.value, &ex.pi, ex.z);
        Ok(v + p)
    }

    /// Random dropout multipliers for one training example.
    pub(crate) fn dropout_mask<R: Rng + ?Sized>(&self, d: f64, rng: &mut R) -> Vec<F> {
        let keep = F::of(1.0 / (1.0 - d));
        (0..self.arch.hidden)
            .map(|_| if rng.gen::<f64>() < d { F::zero() } else { keep })
            .collect()
    }
}

/// Value term `(z − v)²` and policy term `−π·log p`.
pub fn loss_terms<F: Scalar>(log_probs: &[F], value: F, pi: &[F], z: F) -> (F, F) {
    let value_loss = (z - value) * (z - value);
    let policy_loss = -pi
        .iter()
        .zip(log_probs)
        .map(|(&t, &l)| if t == F::zero() { F::zero() } else { t * l })
        .sum::<F>();
    (value_loss, policy_loss)
}

pub(crate) struct Forward<F> {
    patches1: Vec<F>,
    h1: Vec<F>,
    patches2: Vec<F>,
    h2: Vec<F>,
    h3: Vec<F>,
    h3d: Vec<F>,
    log_probs: Vec<F>,
    pub(crate) probs: Vec<F>,
    pub(crate) value: F,
}

fn log_softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = logits.iter().map(|&l| (l - max).exp()).sum::<F>().ln() + max;
    logits.iter().map(|&l| l - lse).collect()
}

/// In-bounds `(kernel offset, source cell)` pairs of every cell's 3×3 window.
fn window_taps(side: usize) -> Vec<Vec<(usize, usize)>> {
    let mut taps = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let mut cell = Vec::with_capacity(9);
            for ky in 0..3 {
                for kx in 0..3 {
                    let (iy, ix) = ((y + ky).wrapping_sub(1), (x + kx).wrapping_sub(1));
                    if iy < side && ix < side {
                        cell.push((ky * 3 + kx, iy * side + ix));
                    }
                }
            }
            taps.push(cell);
        }
    }
    taps
}

/// Patch matrix `[cells][channels * 9]` for a 3×3 same-padded convolution.
fn im2col<F: Scalar>(input: &[F], channels: usize, side: usize) -> Vec<F> {
    let cells = side * side;
    let width = channels * 9;
    let mut out = vec![F::zero(); cells * width];
    for (row, taps) in out.chunks_exact_mut(width).zip(window_taps(side)) {
        for (c, plane) in input.chunks_exact(cells).enumerate() {
            let dst = &mut row[c * 9..c * 9 + 9];
            for &(k, src) in &taps {
                dst[k] = plane[src];
            }
        }
    }
    out
}

/// Adjoint of `im2col`: scatters patch gradients back onto the input grid.
fn col2im<F: Scalar>(patches: &[F], channels: usize, side: usize) -> Vec<F> {
    let cells = side * side;
    let width = channels * 9;
    let mut out = vec![F::zero(); channels * cells];
    for (row, taps) in patches.chunks_exact(width).zip(window_taps(side)) {
        for (c, plane) in out.chunks_exact_mut(cells).enumerate() {
            let src = &row[c * 9..c * 9 + 9];
            for &(k, dst) in &taps {
                plane[dst] += src[k];
            }
        }
    }
    out
}

/// `tanh(W · patch + b)` laid out `[out_channel][cell]`.
fn conv_forward<F: Scalar>(
    patches: &[F],
    weights: &[F],
    bias: &[F],
    out_channels: usize,
    width: usize,
    cells: usize,
) -> Vec<F> {
    let mut out = vec![F::zero(); out_channels * cells];
    for c in 0..out_channels {
        let w = &weights[c * width..(c + 1) * width];
        for p in 0..cells {
            out[c * cells + p] = (dot(w, &patches[p * width..(p + 1) * width]) + bias[c]).activation();
        }
    }
    out
}

/// Accumulates weight/bias gradients; returns patch gradients when requested.
#[allow(clippy::too_many_arguments)]
fn conv_backward<F: Scalar>(
    patches: &[F],
    weights: &[F],
    g_out: &[F],
    out_channels: usize,
    width: usize,
    cells: usize,
    grads: &mut [Vec<F>],
    w_index: usize,
    b_index: usize,
    want_input_grad: bool,
) -> Vec<F> {
    let mut g_patches = if want_input_grad {
        vec![F::zero(); cells * width]
    } else {
        Vec::new()
    };
    for c in 0..out_channels {
        let w = &weights[c * width..(c + 1) * width];
        for p in 0..cells {
            let g = g_out[c * cells + p];
            if g == F::zero() {
                continue;
            }
            let patch = &patches[p * width..(p + 1) * width];
            axpy(g, patch, &mut grads[w_index][c * width..(c + 1) * width]);
            grads[b_index][c] += g;
            if want_input_grad {
                axpy(g, w, &mut g_patches[p * width..(p + 1) * width]);
            }
        }
    }
    g_patches
}

impl<F: Scalar> Evaluator<F> for ModelParams<F> {
    fn evaluate(&self, state: &GameState) -> Result<Evaluation<F>, SearchError> {
        let x: Vec<F> = state.encode();
        let (policy, value) = self
            .predict(&x, state.legal_mask())
            .map_err(|e| SearchError::Evaluator(e.to_string()))?;
        Ok(Evaluation { policy, value })
    }
}

/// Randomly initialized network for `game` with the default architecture.
pub fn init_params<F: Scalar>(game: GameId, seed: u64) -> ModelParams<F> {
    ModelParams::init(Architecture::for_game(game), seed)
}
