//! Checkpoint directory: the encoder parameter files plus `optimizer.bin`
//! (first then second moments, little-endian f32, parameter order) and
//! `state.json` (step counter).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::Tensor;
use crate::scalar::Scalar;
use crate::training::{OptState, TrainingError};
use crate::transformer::{load_params, save_params, EncoderParams};

pub const OPTIMIZER_FILE: &str = "optimizer.bin";
pub const STATE_FILE: &str = "state.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct StateFile {
    step: usize,
    adam_t: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainingError + '_ {
    move |source| TrainingError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_checkpoint<T: Scalar>(
    dir: &Path,
    params: &EncoderParams<T>,
    state: &OptState<T>,
    step: usize,
) -> Result<(), TrainingError> {
    save_params(params, dir)?;
    let mut blob = Vec::new();
    for t in state.m.iter().chain(&state.v) {
        for &x in t.data() {
            blob.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
        }
    }
    let path = dir.join(OPTIMIZER_FILE);
    fs::write(&path, blob).map_err(io_err(&path))?;
    let json = serde_json::to_string_pretty(&StateFile { step, adam_t: state.t }).expect("serializable") + "\n";
    let path = dir.join(STATE_FILE);
    fs::write(&path, json).map_err(io_err(&path))
}

pub fn load_checkpoint<T: Scalar>(dir: &Path) -> Result<(EncoderParams<T>, OptState<T>, usize), TrainingError> {
    let params: EncoderParams<T> = load_params(dir)?;
    let path = dir.join(STATE_FILE);
    let sf: StateFile = serde_json::from_slice(&fs::read(&path).map_err(io_err(&path))?)
        .map_err(|e| TrainingError::Format(format!("{STATE_FILE}: {e}")))?;
    let path = dir.join(OPTIMIZER_FILE);
    let blob = fs::read(&path).map_err(io_err(&path))?;
    if blob.len() != 2 * 4 * params.num_scalars() {
        return Err(TrainingError::Format(format!("{OPTIMIZER_FILE} has the wrong size")));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64));
    let mut take = || -> Vec<Tensor<T>> {
        params
            .tensors()
            .iter()
            .map(|p| Tensor::from_vec(p.shape(), values.by_ref().take(p.len()).collect()).expect("sized"))
            .collect()
    };
    let m = take();
    let v = take();
    Ok((params, OptState { m, v, t: sf.adam_t }, sf.step))
}
