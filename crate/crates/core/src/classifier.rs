//! Fine-tuned encoder bundled with its tokenizer and label set.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::corpus::LabelSet;
use crate::nn::{kernels, softmax, Tensor};
use crate::tokenizer::{load_model, save_model, BpeModel, SpecialIds, TokenizerError};
use crate::transformer::{classify, load_params, save_params, EncoderParams, TokenBatch, TransformerError};

pub const TOKENIZER_DIR: &str = "tokenizer";
pub const ENCODER_DIR: &str = "encoder";
pub const LABELS_FILE: &str = "labels.json";

/// Rows per forward pass at inference.
pub const INFERENCE_BATCH: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Transformer(#[from] TransformerError),
    #[error("model mismatch: {0}")]
    Mismatch(String),
    #[error("malformed model files: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct Classifier {
    tokenizer: BpeModel,
    params: EncoderParams<f32>,
    labels: LabelSet,
    specials: SpecialIds,
}

impl Classifier {
    pub fn new(tokenizer: BpeModel, params: EncoderParams<f32>, labels: LabelSet) -> Result<Self, ModelError> {
        let cfg = params.config();
        if cfg.vocab_size != tokenizer.vocab_size() {
            return Err(ModelError::Mismatch(format!(
                "encoder vocabulary {} vs tokenizer vocabulary {}",
                cfg.vocab_size,
                tokenizer.vocab_size()
            )));
        }
        if cfg.num_classes != labels.len() {
            return Err(ModelError::Mismatch(format!(
                "encoder has {} classes, label set has {}",
                cfg.num_classes,
                labels.len()
            )));
        }
        let specials = tokenizer.special_ids()?;
        Ok(Self {
            tokenizer,
            params,
            labels,
            specials,
        })
    }

    pub fn tokenizer(&self) -> &BpeModel {
        &self.tokenizer
    }

    pub fn params(&self) -> &EncoderParams<f32> {
        &self.params
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn batch_for<S: AsRef<str>>(&self, texts: &[S]) -> TokenBatch {
        let seqs: Vec<_> = texts.iter().map(|t| self.tokenizer.encode(t.as_ref()).0).collect();
        TokenBatch::from_sequences(&seqs, self.specials, self.params.config().max_len)
    }

    /// Class logits `[n × K]`, computed in chunks of [`INFERENCE_BATCH`].
    pub fn logits<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Result<Tensor<f32>, ModelError> {
        let k = self.labels.len();
        let chunks: Vec<Vec<f32>> = texts
            .par_chunks(INFERENCE_BATCH)
            .map(|chunk| classify(&self.params, &self.batch_for(chunk), self.specials.bos).map(Tensor::into_data))
            .collect::<Result<_, _>>()?;
        Ok(Tensor::from_vec(&[texts.len(), k], chunks.concat()).map_err(TransformerError::from)?)
    }

    pub fn predict_batch<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Result<Vec<usize>, ModelError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let z = self.logits(texts)?;
        Ok(z.data().chunks(self.labels.len()).map(kernels::argmax).collect())
    }

    pub fn predict(&self, text: &str) -> Result<usize, ModelError> {
        Ok(self.predict_batch(&[text])?[0])
    }

    /// Labels with softmax confidences, most likely first (ties by label order).
    pub fn rank(&self, text: &str) -> Result<Vec<(String, f64)>, ModelError> {
        let z = self.logits(&[text])?;
        let logits: Vec<f64> = z.data().iter().map(|&x| x as f64).collect();
        let probs = softmax(&logits).map_err(TransformerError::from)?;
        let mut ranked: Vec<(String, f64)> = self.labels.names().iter().cloned().zip(probs).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        Ok(ranked)
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        save_model(&self.tokenizer, &dir.join(TOKENIZER_DIR))?;
        save_params(&self.params, &dir.join(ENCODER_DIR))?;
        let path = dir.join(LABELS_FILE);
        let json = serde_json::to_string_pretty(&self.labels).expect("serializable") + "\n";
        fs::write(&path, json).map_err(|source| ModelError::Io { path, source })
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let tokenizer = load_model(&dir.join(TOKENIZER_DIR))?;
        let params = load_params(&dir.join(ENCODER_DIR))?;
        let path = dir.join(LABELS_FILE);
        let raw = fs::read(&path).map_err(|source| ModelError::Io { path, source })?;
        let labels: LabelSet =
            serde_json::from_slice(&raw).map_err(|e| ModelError::Format(format!("{LABELS_FILE}: {e}")))?;
        Self::new(tokenizer, params, labels)
    }
}
