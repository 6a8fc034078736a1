use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::config::{Paths, RunConfig};
use crate::CliError;

pub const DIR_MANIFEST: &str = "run-manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Record written next to every subcommand's outputs. Holds no timestamps, so
/// identical runs write identical manifests.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    pub seed: Option<u64>,
    /// Digest of the effective config with `paths` cleared.
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn config_digest(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.paths = Paths::default();
    sha256_hex(c.to_json().as_bytes())
}

/// Digests of `path`, or of every file under it in name order.
fn digests(path: &Path) -> Result<Vec<FileDigest>, CliError> {
    let mut files = Vec::new();
    for entry in WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::Data(e.to_string()))?;
        if entry.file_type().is_file() && entry.file_name() != DIR_MANIFEST {
            files.push(entry.into_path());
        }
    }
    files
        .into_iter()
        .map(|f| {
            let bytes = fs::read(&f).map_err(|e| CliError::Data(format!("{}: {e}", f.display())))?;
            Ok(FileDigest {
                path: f.display().to_string(),
                sha256: sha256_hex(&bytes),
            })
        })
        .collect()
}

impl RunManifest {
    pub fn new(command: &str, cfg: &RunConfig, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: config_digest(cfg),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, path: &Path) -> Result<Self, CliError> {
        self.inputs.extend(digests(path)?);
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> Result<Self, CliError> {
        self.outputs.extend(digests(path)?);
        Ok(self)
    }

    /// Writes `<dir>/run-manifest.json` for a directory output, otherwise
    /// `<file>.manifest.json`.
    pub fn write_next_to(&self, output: &Path) -> Result<PathBuf, CliError> {
        let path = if output.is_dir() {
            output.join(DIR_MANIFEST)
        } else {
            let mut name = output.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            output.with_file_name(name)
        };
        let json = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        fs::write(&path, json).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
