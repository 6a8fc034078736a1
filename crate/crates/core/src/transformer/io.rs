//! Parameter files: `config.json`, `manifest.json` (ordered names, shapes,
//! dtype) and `weights.bin` (little-endian f32, concatenated in manifest order).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::Tensor;
use crate::scalar::Scalar;
use crate::transformer::{EncoderConfig, EncoderParams, TransformerError};

pub const CONFIG_FILE: &str = "config.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightsManifest {
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TransformerError + '_ {
    move |source| TransformerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn to_json<S: Serialize>(v: &S) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Writes the three parameter files into `dir`. Values are stored as f32
/// whatever the in-memory scalar type.
pub fn save_params<T: Scalar>(params: &EncoderParams<T>, dir: &Path) -> Result<(), TransformerError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = WeightsManifest {
        dtype: "f32".into(),
        tensors: params
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let mut blob = Vec::with_capacity(params.num_scalars() * 4);
    for t in params.tensors() {
        for &v in t.data() {
            blob.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    for (file, bytes) in [
        (CONFIG_FILE, to_json(params.config()).into_bytes()),
        (MANIFEST_FILE, to_json(&manifest).into_bytes()),
        (WEIGHTS_FILE, blob),
    ] {
        let path = dir.join(file);
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

pub fn load_params<T: Scalar>(dir: &Path) -> Result<EncoderParams<T>, TransformerError> {
    let read = |file: &str| {
        let path = dir.join(file);
        fs::read(&path).map_err(io_err(&path))
    };
    let fmt = |file: &str, e: serde_json::Error| TransformerError::Format(format!("{file}: {e}"));
    let config: EncoderConfig = serde_json::from_slice(&read(CONFIG_FILE)?).map_err(|e| fmt(CONFIG_FILE, e))?;
    let manifest: WeightsManifest =
        serde_json::from_slice(&read(MANIFEST_FILE)?).map_err(|e| fmt(MANIFEST_FILE, e))?;
    if manifest.dtype != "f32" {
        return Err(TransformerError::Format(format!("unsupported dtype {:?}", manifest.dtype)));
    }
    let blob = read(WEIGHTS_FILE)?;
    let total: usize = manifest.tensors.iter().map(|e| e.shape.iter().product::<usize>()).sum();
    if blob.len() != total * 4 {
        return Err(TransformerError::Format(format!(
            "{WEIGHTS_FILE} holds {} bytes, manifest needs {}",
            blob.len(),
            total * 4
        )));
    }
    let mut values = blob
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64));
    let named = manifest
        .tensors
        .into_iter()
        .map(|e| {
            let n = e.shape.iter().product();
            let data: Vec<T> = values.by_ref().take(n).collect();
            Ok((e.name, Tensor::from_vec(&e.shape, data)?))
        })
        .collect::<Result<Vec<_>, TransformerError>>()?;
    EncoderParams::from_named(&config, named)
}
