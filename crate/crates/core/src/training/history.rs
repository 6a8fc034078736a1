use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::training::TrainingError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

/// Per-step losses, optional per-epoch accuracy, and step timings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub epoch_accuracy: Vec<f64>,
    pub step_seconds: Vec<f64>,
    /// Batches dropped because masking selected no position.
    pub skipped_batches: usize,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|r| r.loss).collect()
    }

    /// Mean loss over steps `first..=last` (1-based, inclusive).
    pub fn mean_loss(&self, first: usize, last: usize) -> Option<f64> {
        let xs: Vec<f64> = self
            .steps
            .iter()
            .filter(|r| (first..=last).contains(&r.step))
            .map(|r| r.loss)
            .collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    }

    /// `step,lr,loss` rows. Timings are left out so the file is reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,lr,loss\n");
        for r in &self.steps {
            writeln!(out, "{},{},{}", r.step, r.lr, r.loss).unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TrainingError> {
        fs::write(path, self.to_csv()).map_err(|source| TrainingError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
