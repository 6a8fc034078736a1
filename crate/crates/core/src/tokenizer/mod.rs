//! Byte-level BPE for the neural path and a rule-based word splitter for the
//! baseline.

pub mod alphabet;
mod bpe;
mod io;
mod pretokenize;
mod word;

pub use bpe::{
    train_bpe, train_bpe_with, BpeModel, BpeTrainConfig, SpecialIds, TokenIdSeq, DEFAULT_MAX_LEN, DEFAULT_SPECIALS,
};
pub use io::{load_model, save_model, SpecialsManifest, MERGES_FILE, SPECIALS_FILE, VOCAB_FILE};
pub use pretokenize::Pretokenizer;
pub use word::word_tokenize;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum TokenizerError {
    #[error("vocab size {requested} is below the minimum {minimum} (256 bytes + specials)")]
    VocabTooSmall { requested: usize, minimum: usize },
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    UnknownId { id: u32, vocab_size: usize },
    #[error("special token {0:?} not in vocabulary")]
    MissingSpecial(String),
    #[error("malformed tokenizer data: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
