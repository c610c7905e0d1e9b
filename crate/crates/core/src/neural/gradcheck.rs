use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelParams, TrainingExample};
use crate::scalar::Scalar;

/// Finite-difference step.
const STEP: f64 = 1e-4;
/// Parameters sampled per tensor (the smallest tensors contribute all entries).
const PER_TENSOR: usize = 12;
/// Minimum number of probed parameters overall.
const MIN_TOTAL: usize = 100;
/// Gradients smaller than this in both routes are compared absolutely.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// `(tensor, index)` of the worst entry.
    pub worst: (usize, usize),
}

/// Compares backpropagated gradients with central differences in `f64`.
///
/// Dropout is disabled. Up to `PER_TENSOR` entries of every tensor are
/// probed, topped up to at least `MIN_TOTAL` overall.
pub fn gradient_check<F: Scalar>(
    params: &ModelParams<F>,
    example: &TrainingExample<F>,
    seed: u64,
) -> GradCheckReport {
    let p64: ModelParams<f64> = params.cast();
    let ex64 = cast_example(example);
    let mut grads = p64.zeros_like();
    p64.backward(&ex64, None, &mut grads)
        .expect("example matches architecture");
    gradient_check_against(&p64, &ex64, &grads, seed)
}

/// Compares a supplied gradient with central differences of the loss.
pub fn gradient_check_against(
    params: &ModelParams<f64>,
    example: &TrainingExample<f64>,
    analytic: &ModelParams<f64>,
    seed: u64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: (0, 0),
    };
    let lens: Vec<usize> = params.tensors.iter().map(Vec::len).collect();
    let mut quota: Vec<usize> = lens.iter().map(|&l| PER_TENSOR.min(l)).collect();
    let mut deficit = MIN_TOTAL.saturating_sub(quota.iter().sum());
    for (q, &l) in quota.iter_mut().zip(&lens) {
        let extra = deficit.min(l - *q);
        *q += extra;
        deficit -= extra;
    }
    for t in 0..params.tensors.len() {
        for i in sample(&mut rng, lens[t], quota[t]) {
            let original = params.tensors[t][i];
            probe.tensors[t][i] = original + STEP;
            let plus = probe.loss(example).expect("shape checked");
            probe.tensors[t][i] = original - STEP;
            let minus = probe.loss(example).expect("shape checked");
            probe.tensors[t][i] = original;

            let numeric = (plus - minus) / (2.0 * STEP);
            let exact = analytic.tensors[t][i];
            let err = (numeric - exact).abs() / numeric.abs().max(exact.abs()).max(FLOOR);
            report.checked += 1;
            if err > report.max_relative_error || !err.is_finite() {
                report.max_relative_error = if err.is_finite() { err } else { f64::INFINITY };
                report.worst = (t, i);
            }
        }
    }
    report
}

fn cast_example<F: Scalar>(ex: &TrainingExample<F>) -> TrainingExample<f64> {
    TrainingExample {
        x: ex.x.iter().map(|v| v.as_f64()).collect(),
        pi: ex.pi.iter().map(|v| v.as_f64()).collect(),
        z: ex.z.as_f64(),
    }
}
