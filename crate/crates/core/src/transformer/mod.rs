//! Pre-norm bidirectional transformer encoder with a tied MLM head and a
//! position-0 classification head.

mod batch;
mod forward;
mod io;
mod params;

pub use batch::TokenBatch;
pub use forward::{bind, classify, encoder_forward, mlm_logits, predict, EncoderGraph, Forward, Mode};
pub use io::{load_params, save_params, TensorEntry, WeightsManifest, CONFIG_FILE, MANIFEST_FILE, WEIGHTS_FILE};
pub use params::{param_shapes, EncoderParams, INIT_STD};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::nn::NnError;

/// Encoder hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub model_dim: usize,
    pub num_heads: usize,
    pub num_layers: usize,
    pub ff_dim: usize,
    pub dropout: f64,
    pub num_classes: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            vocab_size: 8000,
            max_len: 256,
            model_dim: 128,
            num_heads: 4,
            num_layers: 2,
            ff_dim: 512,
            dropout: 0.1,
            num_classes: 19,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), TransformerError> {
        let bad = |m: String| Err(TransformerError::InvalidConfig(m));
        for (name, v) in [
            ("vocab_size", self.vocab_size),
            ("max_len", self.max_len),
            ("model_dim", self.model_dim),
            ("num_heads", self.num_heads),
            ("ff_dim", self.ff_dim),
            ("num_classes", self.num_classes),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !self.model_dim.is_multiple_of(self.num_heads) {
            return bad(format!(
                "model_dim {} not divisible by num_heads {}",
                self.model_dim, self.num_heads
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransformerError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: usize },
    #[error("batch width {width} exceeds max_len {max_len}")]
    TooWide { width: usize, max_len: usize },
    #[error("row {row} does not begin with <s>")]
    MissingBos { row: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("malformed parameter files: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(EncoderConfig::default().validate().is_ok());
        let mut c = EncoderConfig {
            num_heads: 3,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.num_heads = 4;
        c.dropout = 1.0;
        assert!(c.validate().is_err());
        c.dropout = 0.0;
        c.num_layers = 0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn config_json_fills_defaults() {
        let c: EncoderConfig = serde_json::from_str(r#"{"model_dim": 64}"#).unwrap();
        assert_eq!(c.model_dim, 64);
        assert_eq!(c.vocab_size, 8000);
        assert!(serde_json::from_str::<EncoderConfig>(r#"{"dim": 64}"#).is_err());
    }
}
