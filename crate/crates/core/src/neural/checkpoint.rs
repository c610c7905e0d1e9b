use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Architecture, ModelParams, NeuralError};
use crate::scalar::Scalar;

const FORMAT: &str = "warmstart-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    /// Little-endian `f32` values, base64.
    data: String,
}

/// On-disk checkpoint: architecture, iteration and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    pub architecture: Architecture,
    pub iteration: usize,
    tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_params<F: Scalar>(params: &ModelParams<F>, iteration: usize) -> Self {
        let tensors = params
            .arch
            .tensor_shapes()
            .into_iter()
            .zip(&params.tensors)
            .map(|((name, shape), values)| {
                let mut bytes = Vec::with_capacity(values.len() * 4);
                for v in values {
                    bytes.extend_from_slice(&v.as_f32().to_le_bytes());
                }
                TensorRecord {
                    name: name.to_string(),
                    shape,
                    data: STANDARD.encode(bytes),
                }
            })
            .collect();
        Checkpoint {
            format: FORMAT.to_string(),
            architecture: params.arch,
            iteration,
            tensors,
        }
    }

    pub fn to_params<F: Scalar>(&self) -> Result<ModelParams<F>, NeuralError> {
        if self.format != FORMAT {
            return Err(NeuralError::Checkpoint(format!("unknown format '{}'", self.format)));
        }
        let expected = self.architecture.tensor_shapes();
        if expected.len() != self.tensors.len() {
            return Err(NeuralError::Checkpoint(format!(
                "expected {} tensors, found {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        let mut tensors = Vec::with_capacity(expected.len());
        for ((name, shape), rec) in expected.into_iter().zip(&self.tensors) {
            if rec.name != name || rec.shape != shape {
                return Err(NeuralError::Checkpoint(format!(
                    "tensor '{}' {:?} does not match architecture '{name}' {shape:?}",
                    rec.name, rec.shape
                )));
            }
            let bytes = STANDARD
                .decode(&rec.data)
                .map_err(|e| NeuralError::Checkpoint(format!("tensor '{name}': {e}")))?;
            let len: usize = shape.iter().product();
            if bytes.len() != len * 4 {
                return Err(NeuralError::Checkpoint(format!(
                    "tensor '{name}' has {} bytes, expected {}",
                    bytes.len(),
                    len * 4
                )));
            }
            let values: Vec<F> = bytes
                .chunks_exact(4)
                .map(|c| F::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(NeuralError::Checkpoint(format!("tensor '{name}' has non-finite values")));
            }
            tensors.push(values);
        }
        Ok(ModelParams {
            arch: self.architecture,
            tensors,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NeuralError> {
        serde_json::from_str(text).map_err(|e| NeuralError::Checkpoint(e.to_string()))
    }
}

pub fn save_checkpoint<F: Scalar>(
    path: &Path,
    params: &ModelParams<F>,
    iteration: usize,
) -> Result<(), NeuralError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, Checkpoint::from_params(params, iteration).to_json())?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<(ModelParams<F>, usize), NeuralError> {
    let text = fs::read_to_string(path)
        .map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))?;
    let ck = Checkpoint::from_json(&text)
        .map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))?;
    let params = ck
        .to_params()
        .map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))?;
    Ok((params, ck.iteration))
}
