use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelParams, NeuralError, ReplayBuffer, TrainingExample};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.005,
            dropout: 0.3,
            optimizer: Optimizer::Sgd,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.epochs == 0 {
            return Err(NeuralError::InvalidConfig("ep must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::InvalidConfig("bs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::InvalidConfig("lr must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NeuralError::InvalidConfig("d must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub batches: usize,
}

struct Adam<F> {
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    step: i32,
}

/// Minimizes `(z − v)² − π·log p` (batch mean) over shuffled minibatches.
/// The input parameters are left untouched.
pub fn train<F: Scalar>(
    params: &ModelParams<F>,
    buffer: &ReplayBuffer<F>,
    cfg: &TrainConfig,
) -> Result<(ModelParams<F>, TrainReport), NeuralError> {
    cfg.validate()?;
    let examples: Vec<&TrainingExample<F>> = buffer.examples().collect();
    if examples.is_empty() {
        return Err(NeuralError::EmptyBuffer);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = params.clone();
    let mut grads = params.zeros_like();
    let mut adam = Adam {
        m: params.zeros_like().tensors,
        v: params.zeros_like().tensors,
        step: 0,
    };
    let lr = F::of(cfg.learning_rate);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        batches: 0,
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.tensors.iter_mut().for_each(|t| t.fill(F::zero()));
            let mut loss = F::zero();
            for &i in batch {
                let mask = (cfg.dropout > 0.0).then(|| current.dropout_mask(cfg.dropout, &mut rng));
                loss += current.backward(examples[i], mask.as_deref(), &mut grads)?;
            }
            let scale = F::one() / F::of_usize(batch.len());
            loss *= scale;
            if !loss.is_finite() {
                return Err(NeuralError::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (w, g) in current.tensors.iter_mut().zip(&grads.tensors) {
                        for (wi, &gi) in w.iter_mut().zip(g) {
                            *wi -= lr * gi * scale;
                        }
                    }
                }
                Optimizer::Adam => adam_step(&mut current, &grads, &mut adam, lr, scale),
            }
            epoch_loss += loss.as_f64();
            batches += 1;
        }
        report.epoch_losses.push(epoch_loss / batches as f64);
        report.batches += batches;
    }
    Ok((current, report))
}

fn adam_step<F: Scalar>(
    params: &mut ModelParams<F>,
    grads: &ModelParams<F>,
    state: &mut Adam<F>,
    lr: F,
    scale: F,
) {
    let (b1, b2, eps) = (F::of(0.9), F::of(0.999), F::of(1e-8));
    state.step += 1;
    let c1 = F::one() - b1.powi(state.step);
    let c2 = F::one() - b2.powi(state.step);
    for t in 0..params.tensors.len() {
        for i in 0..params.tensors[t].len() {
            let g = grads.tensors[t][i] * scale;
            let m = b1 * state.m[t][i] + (F::one() - b1) * g;
            let v = b2 * state.v[t][i] + (F::one() - b2) * g * g;
            state.m[t][i] = m;
            state.v[t][i] = v;
            params.tensors[t][i] -= lr * (m / c1) / ((v / c2).sqrt() + eps);
        }
    }
}
