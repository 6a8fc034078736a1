//! Multinomial Naive Bayes over word tokens, with Laplace-style smoothing and
//! one shared out-of-vocabulary bucket per class.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabelSet};
use crate::nn::kernels;
use crate::tokenizer::word_tokenize;

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("smoothing alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("malformed model: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// On-disk form; `log_likelihood[c]` has one entry per vocabulary token plus
/// a final OOV entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NbFile {
    alpha: f64,
    labels: LabelSet,
    vocabulary: Vec<String>,
    log_prior: Vec<f64>,
    log_likelihood: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    alpha: f64,
    labels: LabelSet,
    vocabulary: Vec<String>,
    index: HashMap<String, usize>,
    log_prior: Vec<f64>,
    log_likelihood: Vec<Vec<f64>>,
}

/// Fits class priors and smoothed token likelihoods:
/// `P(t|c) = (count(t,c) + α) / (tokens_in_c + α·(|V| + 1))`.
///
/// The label set holds the classes that occur in `train`, in the corpus
/// label order.
pub fn fit_nb(train: &Corpus, alpha: f64) -> Result<NbModel, BaselineError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(BaselineError::InvalidAlpha(alpha));
    }
    if train.is_empty() {
        return Err(BaselineError::EmptyCorpus);
    }
    let present: Vec<String> = train
        .labels()
        .names()
        .iter()
        .filter(|n| train.snippets().iter().any(|s| &s.label == *n))
        .cloned()
        .collect();
    let labels = LabelSet::from_ordered(present).expect("names are unique");

    let docs: Vec<(usize, Vec<String>)> = train
        .snippets()
        .iter()
        .map(|s| (labels.id(&s.label).expect("present"), word_tokenize(&s.text)))
        .collect();
    let mut vocabulary: Vec<String> = docs.iter().flat_map(|(_, toks)| toks.iter().cloned()).collect();
    vocabulary.sort_unstable();
    vocabulary.dedup();
    let index: HashMap<String, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();

    let k = labels.len();
    let v = vocabulary.len();
    let mut doc_counts = vec![0usize; k];
    let mut counts = vec![vec![0u64; v]; k];
    let mut totals = vec![0u64; k];
    for (c, toks) in &docs {
        doc_counts[*c] += 1;
        for t in toks {
            counts[*c][index[t]] += 1;
            totals[*c] += 1;
        }
    }
    let n = train.len() as f64;
    let log_prior = doc_counts.iter().map(|&d| (d as f64 / n).ln()).collect();
    let log_likelihood = (0..k)
        .map(|c| {
            let denom = (totals[c] as f64 + alpha * (v + 1) as f64).ln();
            counts[c]
                .iter()
                .map(|&x| (x as f64 + alpha).ln() - denom)
                .chain(std::iter::once(alpha.ln() - denom))
                .collect()
        })
        .collect();
    Ok(NbModel {
        alpha,
        labels,
        vocabulary,
        index,
        log_prior,
        log_likelihood,
    })
}

impl NbModel {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn log_prior(&self) -> &[f64] {
        &self.log_prior
    }

    /// `log P(t|c)` for every vocabulary token, then the OOV bucket.
    pub fn log_likelihood(&self, class: usize) -> &[f64] {
        &self.log_likelihood[class]
    }

    /// Feature id of `token`; the OOV bucket for unseen tokens.
    pub fn feature(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(self.vocabulary.len())
    }

    /// Unnormalized `log P(c) + Σ log P(t|c)` per class.
    pub fn log_scores(&self, text: &str) -> Vec<f64> {
        let feats: Vec<usize> = word_tokenize(text).iter().map(|t| self.feature(t)).collect();
        self.log_prior
            .iter()
            .zip(&self.log_likelihood)
            .map(|(&p, ll)| p + feats.iter().map(|&f| ll[f]).sum::<f64>())
            .collect()
    }

    /// Log posteriors, normalized over classes.
    pub fn log_posterior(&self, text: &str) -> Vec<f64> {
        let s = self.log_scores(text);
        let lse = kernels::log_sum_exp(&s);
        s.iter().map(|x| x - lse).collect()
    }

    pub fn posterior(&self, text: &str) -> Vec<f64> {
        self.log_posterior(text).iter().map(|x| x.exp()).collect()
    }

    /// Highest-scoring class, ties toward the lowest index.
    pub fn predict(&self, text: &str) -> usize {
        kernels::argmax(&self.log_scores(text))
    }

    pub fn to_json(&self) -> String {
        let file = NbFile {
            alpha: self.alpha,
            labels: self.labels.clone(),
            vocabulary: self.vocabulary.clone(),
            log_prior: self.log_prior.clone(),
            log_likelihood: self.log_likelihood.clone(),
        };
        serde_json::to_string(&file).expect("finite values serialize") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Self, BaselineError> {
        let f: NbFile = serde_json::from_str(s).map_err(|e| BaselineError::Format(e.to_string()))?;
        let (k, v) = (f.labels.len(), f.vocabulary.len());
        if f.log_prior.len() != k || f.log_likelihood.len() != k || f.log_likelihood.iter().any(|r| r.len() != v + 1) {
            return Err(BaselineError::Format("array sizes disagree with labels and vocabulary".into()));
        }
        let index: HashMap<String, usize> = f.vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != v {
            return Err(BaselineError::Format("duplicate vocabulary entry".into()));
        }
        Ok(Self {
            alpha: f.alpha,
            labels: f.labels,
            vocabulary: f.vocabulary,
            index,
            log_prior: f.log_prior,
            log_likelihood: f.log_likelihood,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        fs::write(path, self.to_json()).map_err(|source| BaselineError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        let s = fs::read_to_string(path).map_err(|source| BaselineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&s)
    }
}
