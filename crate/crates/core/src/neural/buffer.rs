use std::collections::VecDeque;
use std::io::{Read, Write};

use super::NeuralError;
use crate::game::BOARD_SIDE;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"WSEX";
const VERSION: u32 = 1;

/// One `(state, π, z)` training triple; `z` is from the state's side to move.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample<F> {
    pub x: Vec<F>,
    pub pi: Vec<F>,
    pub z: F,
}

/// Examples of the most recent `capacity` iterations; older iterations are
/// dropped whole.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<F> {
    capacity: usize,
    iterations: VecDeque<(usize, Vec<TrainingExample<F>>)>,
}

impl<F: Scalar> ReplayBuffer<F> {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            iterations: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, iteration: usize, examples: Vec<TrainingExample<F>>) {
        self.iterations.push_back((iteration, examples));
        while self.iterations.len() > self.capacity {
            self.iterations.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.iterations.iter().map(|(_, e)| e.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Iteration indices currently held, oldest first.
    pub fn iterations(&self) -> impl Iterator<Item = usize> + '_ {
        self.iterations.iter().map(|(i, _)| *i)
    }

    /// Examples contributed by iteration `k`, if still held.
    pub fn iteration(&self, k: usize) -> Option<&[TrainingExample<F>]> {
        self.iterations
            .iter()
            .find(|(i, _)| *i == k)
            .map(|(_, e)| e.as_slice())
    }

    /// All examples, oldest iteration first.
    pub fn examples(&self) -> impl Iterator<Item = &TrainingExample<F>> {
        self.iterations.iter().flat_map(|(_, e)| e.iter())
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Writes examples as length-prefixed little-endian records.
///
/// Layout: `"WSEX"`, `u32` version, `u32` record count, then per record a
/// `u32` body length followed by the body: `u32` planes, `u32` rows, `u32`
/// cols, `u32` policy length, the `f32` state payload, the `f32` policy and
/// the `f32` outcome.
pub fn write_examples<F: Scalar, W: Write>(
    mut w: W,
    examples: &[TrainingExample<F>],
) -> Result<(), NeuralError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, examples.len() as u32);
    for ex in examples {
        let mut body = Vec::with_capacity(16 + 4 * (ex.x.len() + ex.pi.len() + 1));
        let planes = ex.x.len() / (BOARD_SIDE * BOARD_SIDE);
        put_u32(&mut body, planes as u32);
        put_u32(&mut body, BOARD_SIDE as u32);
        put_u32(&mut body, BOARD_SIDE as u32);
        put_u32(&mut body, ex.pi.len() as u32);
        ex.x.iter().for_each(|v| put_f32(&mut body, v.as_f32()));
        ex.pi.iter().for_each(|v| put_f32(&mut body, v.as_f32()));
        put_f32(&mut body, ex.z.as_f32());
        put_u32(&mut out, body.len() as u32);
        out.extend_from_slice(&body);
    }
    w.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], NeuralError> {
        if self.pos + n > self.data.len() {
            return Err(NeuralError::Examples(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, NeuralError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_examples<F: Scalar, R: Read>(mut r: R) -> Result<Vec<TrainingExample<F>>, NeuralError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut cur = Cursor { data: &data, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(NeuralError::Examples("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(NeuralError::Examples(format!("unsupported version {version}")));
    }
    let count = cur.u32()? as usize;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let body_len = cur.u32()? as usize;
        let start = cur.pos;
        let planes = cur.u32()? as usize;
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let pi_len = cur.u32()? as usize;
        let x_len = planes * rows * cols;
        let x = (0..x_len)
            .map(|_| cur.f32().map(|v| F::of(v as f64)))
            .collect::<Result<Vec<_>, _>>()?;
        let pi = (0..pi_len)
            .map(|_| cur.f32().map(|v| F::of(v as f64)))
            .collect::<Result<Vec<_>, _>>()?;
        let z = F::of(cur.f32()? as f64);
        if cur.pos - start != body_len {
            return Err(NeuralError::Examples(format!(
                "record {i}: length prefix {body_len} does not match body {}",
                cur.pos - start
            )));
        }
        out.push(TrainingExample { x, pi, z });
    }
    if cur.pos != data.len() {
        return Err(NeuralError::Examples("trailing bytes after last record".into()));
    }
    Ok(out)
}
