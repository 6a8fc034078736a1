//! Multiclass metrics: confusion matrix, per-class precision/recall/F1,
//! aggregates and the confusability listing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::NbModel;
use crate::classifier::{Classifier, INFERENCE_BATCH};
use crate::corpus::{Corpus, LabelSet};

pub type PredictError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{preds} predictions for {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("class id {id} out of range for {k} classes")]
    IdOutOfRange { id: usize, k: usize },
    #[error("confusion matrix has no entries")]
    EmptyMatrix,
    #[error("{got} metric rows for {k} classes")]
    Shape { got: usize, k: usize },
    #[error("snippet {index}: label {label:?} unknown to the model")]
    UnknownLabel { index: usize, label: String },
    #[error("snippet {index}: prediction failed: {source}")]
    Prediction {
        index: usize,
        #[source]
        source: PredictError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Square count matrix; rows are gold classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self { counts: vec![vec![0; k]; k] }
    }

    /// Panics unless `counts` is square.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let k = counts.len();
        assert!(counts.iter().all(|r| r.len() == k), "confusion matrix must be square");
        Self { counts }
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, actual: usize, predicted: usize) -> u64 {
        self.counts[actual][predicted]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|c| self.counts[c][c]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn confusion(preds: &[usize], golds: &[usize], k: usize) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    let mut m = ConfusionMatrix::zeros(k);
    for (&p, &g) in preds.iter().zip(golds) {
        if let Some(&id) = [g, p].iter().find(|&&id| id >= k) {
            return Err(EvalError::IdOutOfRange { id, k });
        }
        m.counts[g][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// One-vs-rest metrics per class. A zero denominator gives 0.
pub fn per_class(m: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..m.k())
        .map(|c| {
            let tp = m.get(c, c);
            let predicted = m.col_sum(c);
            let support = m.row_sum(c);
            // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN)
            ClassMetrics {
                precision: ratio(tp, predicted),
                recall: ratio(tp, support),
                f1: ratio(2 * tp, predicted + support),
                support,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub averaging: Averaging,
}

/// Accuracy as trace over total; P/R/F1 averaged over classes, unweighted
/// or weighted by support.
pub fn aggregate(per_class: &[ClassMetrics], m: &ConfusionMatrix, averaging: Averaging) -> Result<Aggregate, EvalError> {
    if per_class.len() != m.k() {
        return Err(EvalError::Shape {
            got: per_class.len(),
            k: m.k(),
        });
    }
    let total = m.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mean = |f: fn(&ClassMetrics) -> f64| match averaging {
        Averaging::Macro => per_class.iter().map(f).sum::<f64>() / per_class.len() as f64,
        Averaging::Weighted => per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64,
    };
    Ok(Aggregate {
        accuracy: m.trace() as f64 / total as f64,
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
        averaging,
    })
}

/// Fraction as a percentage with three decimals: 0.87202 → "87.202".
pub fn percent(x: f64) -> String {
    format!("{:.3}", x * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusable {
    pub actual: usize,
    pub predicted: usize,
    pub count: u64,
    pub rate: f64,
}

/// Off-diagonal cells with a nonzero count, by rate `count / row_sum(actual)`
/// descending, then count descending, then label order; first `top_n` kept.
pub fn confusability(m: &ConfusionMatrix, top_n: usize) -> Vec<Confusable> {
    let mut cells: Vec<(usize, usize, u64, u64)> = Vec::new();
    for a in 0..m.k() {
        let row = m.row_sum(a);
        for p in (0..m.k()).filter(|&p| p != a && m.get(a, p) > 0) {
            cells.push((a, p, m.get(a, p), row));
        }
    }
    // exact comparison of count/row fractions
    cells.sort_by(|x, y| {
        let lhs = x.2 as u128 * y.3 as u128;
        let rhs = y.2 as u128 * x.3 as u128;
        rhs.cmp(&lhs)
            .then(y.2.cmp(&x.2))
            .then((x.0, x.1).cmp(&(y.0, y.1)))
    });
    cells
        .into_iter()
        .take(top_n)
        .map(|(actual, predicted, count, row)| Confusable {
            actual,
            predicted,
            count,
            rate: count as f64 / row as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMetrics {
    pub label: String,
    #[serde(flatten)]
    pub metrics: ClassMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusedPair {
    pub actual: String,
    pub predicted: String,
    pub count: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub total: u64,
    pub accuracy: f64,
    pub averaging: Averaging,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<LabeledMetrics>,
    pub confusability: Vec<ConfusedPair>,
    pub confusion: ConfusionMatrix,
}

pub const DEFAULT_TOP_N: usize = 10;

impl EvalReport {
    pub fn build(m: &ConfusionMatrix, labels: &LabelSet, averaging: Averaging, top_n: usize) -> Result<Self, EvalError> {
        if labels.len() != m.k() {
            return Err(EvalError::Shape {
                got: labels.len(),
                k: m.k(),
            });
        }
        let rows = per_class(m);
        let agg = aggregate(&rows, m, averaging)?;
        let name = |i: usize| labels.names()[i].clone();
        Ok(Self {
            labels: labels.names().to_vec(),
            total: m.total(),
            accuracy: agg.accuracy,
            averaging,
            precision: agg.precision,
            recall: agg.recall,
            f1: agg.f1,
            per_class: rows
                .into_iter()
                .enumerate()
                .map(|(i, metrics)| LabeledMetrics { label: name(i), metrics })
                .collect(),
            confusability: confusability(m, top_n)
                .into_iter()
                .map(|c| ConfusedPair {
                    actual: name(c.actual),
                    predicted: name(c.predicted),
                    count: c.count,
                    rate: c.rate,
                })
                .collect(),
            confusion: m.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Per-class rows (Precision, Recall, F1, Support), then the aggregate
    /// line in percent and the most confused pairs.
    pub fn to_table(&self) -> String {
        let w = self.labels.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:<w$}  {:>9}  {:>6}  {:>6}  {:>7}", "", "Precision", "Recall", "F1", "Support");
        for r in &self.per_class {
            let m = r.metrics;
            let _ = writeln!(
                out,
                "{:<w$}  {:>9.2}  {:>6.2}  {:>6.2}  {:>7}",
                r.label, m.precision, m.recall, m.f1, m.support
            );
        }
        let _ = writeln!(out);
        let avg = match self.averaging {
            Averaging::Macro => "macro",
            Averaging::Weighted => "weighted",
        };
        let _ = writeln!(
            out,
            "Accuracy(%) {}  Precision(%) {}  Recall(%) {}  F1(%) {}  [{avg}, n={}]",
            percent(self.accuracy),
            percent(self.precision),
            percent(self.recall),
            percent(self.f1),
            self.total
        );
        if !self.confusability.is_empty() {
            let _ = writeln!(out, "\nMost confused (actual -> predicted):");
            for c in &self.confusability {
                let _ = writeln!(
                    out,
                    "  {} -> {}: {} ({:.3})",
                    c.actual, c.predicted, c.count, c.rate
                );
            }
        }
        out
    }

    pub fn save_json(&self, path: &Path) -> Result<(), EvalError> {
        fs::write(path, self.to_json()).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Anything that maps snippet text to a class id of its label set.
pub trait Predictor {
    fn label_set(&self) -> &LabelSet;

    fn predict_text(&self, text: &str) -> Result<usize, PredictError>;

    /// Predictions in input order; a failure reports the first failing index.
    fn predict_texts(&self, texts: &[&str]) -> Result<Vec<usize>, (usize, PredictError)> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| self.predict_text(t).map_err(|e| (i, e)))
            .collect()
    }
}

impl Predictor for NbModel {
    fn label_set(&self) -> &LabelSet {
        self.labels()
    }

    fn predict_text(&self, text: &str) -> Result<usize, PredictError> {
        Ok(self.predict(text))
    }

    fn predict_texts(&self, texts: &[&str]) -> Result<Vec<usize>, (usize, PredictError)> {
        Ok(texts.par_iter().map(|t| self.predict(t)).collect())
    }
}

impl Predictor for Classifier {
    fn label_set(&self) -> &LabelSet {
        self.labels()
    }

    fn predict_text(&self, text: &str) -> Result<usize, PredictError> {
        Ok(self.predict(text)?)
    }

    fn predict_texts(&self, texts: &[&str]) -> Result<Vec<usize>, (usize, PredictError)> {
        let step = INFERENCE_BATCH * rayon::current_num_threads();
        let mut out = Vec::with_capacity(texts.len());
        for (c, chunk) in texts.chunks(step).enumerate() {
            match self.predict_batch(chunk) {
                Ok(p) => out.extend(p),
                // retry one by one to locate the offending snippet
                Err(_) => {
                    for (i, t) in chunk.iter().enumerate() {
                        out.push(self.predict_text(t).map_err(|e| (c * step + i, e))?);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Predicts every test snippet and reports metrics over the model's labels.
/// Classes the model knows but the test set lacks appear with zero support.
pub fn evaluate_model<P: Predictor + ?Sized>(
    model: &P,
    test: &Corpus,
    averaging: Averaging,
    top_n: usize,
) -> Result<EvalReport, EvalError> {
    let labels = model.label_set();
    let golds: Vec<usize> = test
        .snippets()
        .iter()
        .enumerate()
        .map(|(index, s)| {
            labels.id(&s.label).ok_or_else(|| EvalError::UnknownLabel {
                index,
                label: s.label.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    let texts: Vec<&str> = test.texts().collect();
    let preds = model
        .predict_texts(&texts)
        .map_err(|(index, source)| EvalError::Prediction { index, source })?;
    let m = confusion(&preds, &golds, labels.len())?;
    EvalReport::build(&m, labels, averaging, top_n)
}
