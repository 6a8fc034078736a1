//! On-disk form: `merges.txt`, `vocab.json`, `specials.json` in one directory.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::tokenizer::{BpeModel, Pretokenizer, TokenizerError};

pub const MERGES_FILE: &str = "merges.txt";
pub const VOCAB_FILE: &str = "vocab.json";
pub const SPECIALS_FILE: &str = "specials.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialsManifest {
    pub specials: Vec<String>,
    #[serde(default)]
    pub max_len: Option<usize>,
    #[serde(default)]
    pub pretokenizer: Pretokenizer,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TokenizerError + '_ {
    move |source| TokenizerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: PathBuf, contents: &str) -> Result<(), TokenizerError> {
    fs::write(&path, contents).map_err(io_err(&path))
}

fn read(path: PathBuf) -> Result<String, TokenizerError> {
    fs::read_to_string(&path).map_err(io_err(&path))
}

pub fn save_model(model: &BpeModel, dir: &Path) -> Result<(), TokenizerError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut merges = String::new();
    for (l, r) in model.merges() {
        merges.push_str(l);
        merges.push(' ');
        merges.push_str(r);
        merges.push('\n');
    }
    write(dir.join(MERGES_FILE), &merges)?;

    let vocab: BTreeMap<&str, u32> = model.vocab().iter().map(|(k, &v)| (k.as_str(), v)).collect();
    let json = serde_json::to_string_pretty(&vocab).map_err(|e| TokenizerError::Format(e.to_string()))?;
    write(dir.join(VOCAB_FILE), &json)?;

    let manifest = SpecialsManifest {
        specials: model.specials().to_vec(),
        max_len: model.max_len(),
        pretokenizer: model.pretokenizer(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| TokenizerError::Format(e.to_string()))?;
    write(dir.join(SPECIALS_FILE), &json)
}

pub fn load_model(dir: &Path) -> Result<BpeModel, TokenizerError> {
    let merges_text = read(dir.join(MERGES_FILE))?;
    let mut merges = Vec::new();
    for (i, line) in merges_text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (l, r) = line
            .split_once(' ')
            .filter(|(l, r)| !l.is_empty() && !r.is_empty() && !r.contains(' '))
            .ok_or_else(|| TokenizerError::Format(format!("{MERGES_FILE} line {}: expected \"left right\"", i + 1)))?;
        merges.push((l.to_string(), r.to_string()));
    }
    let vocab: HashMap<String, u32> = serde_json::from_str(&read(dir.join(VOCAB_FILE))?)
        .map_err(|e| TokenizerError::Format(format!("{VOCAB_FILE}: {e}")))?;
    let manifest: SpecialsManifest = serde_json::from_str(&read(dir.join(SPECIALS_FILE))?)
        .map_err(|e| TokenizerError::Format(format!("{SPECIALS_FILE}: {e}")))?;
    BpeModel::from_parts(vocab, merges, manifest.specials, manifest.max_len, manifest.pretokenizer)
}
