use std::fs;
use std::path::{Path, PathBuf};

use codelang_core::corpus::CleaningPolicy;
use codelang_core::eval::{Averaging, DEFAULT_TOP_N};
use codelang_core::tokenizer::Pretokenizer;
use codelang_core::training::{MaskingPolicy, OptimizerHyper};
use codelang_core::transformer::EncoderConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Default locations of every pipeline artifact. Relative entries are taken
/// relative to the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub raw: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub split_dir: Option<PathBuf>,
    pub tokenizer: Option<PathBuf>,
    pub pretrained: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub baseline: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerSettings {
    pub vocab_size: usize,
    pub pretokenizer: Pretokenizer,
    pub min_pair_count: u64,
}

impl Default for TokenizerSettings {
    fn default() -> Self {
        Self {
            vocab_size: 8000,
            pretokenizer: Pretokenizer::Code,
            min_pair_count: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub averaging: Averaging,
    pub top_n: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            averaging: Averaging::Macro,
            top_n: DEFAULT_TOP_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub test_fraction: f64,
    pub alpha: f64,
    pub paths: Paths,
    pub cleaning: CleaningPolicy,
    pub tokenizer: TokenizerSettings,
    /// `vocab_size` is replaced by the trained tokenizer's size.
    pub encoder: EncoderConfig,
    pub masking: MaskingPolicy,
    pub pretrain: OptimizerHyper,
    pub finetune: OptimizerHyper,
    pub report: ReportSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            batch_size: 32,
            test_fraction: 0.2,
            alpha: 1.0,
            paths: Paths::default(),
            cleaning: CleaningPolicy::default(),
            tokenizer: TokenizerSettings::default(),
            encoder: EncoderConfig::default(),
            masking: MaskingPolicy::default(),
            pretrain: OptimizerHyper::default(),
            finetune: OptimizerHyper::default(),
            report: ReportSettings::default(),
        }
    }
}

impl RunConfig {
    /// Reads a JSON config; missing fields take defaults and relative paths
    /// are rebased onto the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let raw = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&raw).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.raw,
            &mut p.corpus,
            &mut p.split_dir,
            &mut p.tokenizer,
            &mut p.pretrained,
            &mut p.model,
            &mut p.baseline,
            &mut p.report,
        ] {
            if let Some(rel) = slot.as_ref().filter(|p| p.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(format!("invalid config: {m}")));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return bad(format!("test_fraction {} outside [0, 1]", self.test_fraction));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if let Err(e) = self.cleaning.validate() {
            return bad(e.to_string());
        }
        if let Err(e) = self.masking.validate() {
            return bad(e.to_string());
        }
        for h in [&self.pretrain, &self.finetune] {
            if let Err(e) = h.validate() {
                return bad(e.to_string());
            }
        }
        Ok(())
    }

    /// Canonical JSON used for hashing.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
