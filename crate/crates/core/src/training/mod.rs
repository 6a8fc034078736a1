//! Masked-LM pretraining, fine-tuning, and the AdamW optimizer.

mod checkpoint;
mod history;
mod loops;
mod masking;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, OPTIMIZER_FILE, STATE_FILE};
pub use history::{StepRecord, TrainHistory};
pub use loops::{finetune, pretrain_mlm, TrainOptions, TrainOutcome};
pub use masking::{mask_for_mlm, MaskedBatch, Masker, MaskingPolicy};
pub use optim::{adamw_step, is_no_decay, lr_at, partition_params, OptState, OptimizerHyper, ParamPartition};

use std::path::PathBuf;

use crate::classifier::ModelError;
use crate::nn::NnError;
use crate::tokenizer::TokenizerError;
use crate::transformer::TransformerError;

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error("invalid masking policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid optimizer settings: {0}")]
    InvalidHyper(String),
    #[error("step {step} outside the schedule 0..={total}")]
    StepOutOfRange { step: usize, total: usize },
    #[error("tensor {0} has no name")]
    UnnamedTensor(usize),
    #[error("non-finite gradient for tensor {0}")]
    NonFiniteGradient(usize),
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("tokenizer vocabulary {tokenizer} does not match encoder vocabulary {model}")]
    VocabMismatch { tokenizer: usize, model: usize },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("masking selected no position in 1000 consecutive batches")]
    NoMaskableTokens,
    #[error(transparent)]
    Transformer(#[from] TransformerError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
