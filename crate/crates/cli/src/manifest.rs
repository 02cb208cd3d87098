//! Reproducibility manifests: seed, config digest and output digests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Written next to every command's outputs. Holds no timestamps or thread
/// counts so identical inputs give identical manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub seed: Option<u64>,
    pub config_sha256: Option<String>,
    /// Output file name → SHA-256 of its contents.
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config_text: Option<&str>) -> Self {
        RunManifest {
            command: command.to_string(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: config_text.map(|t| sha256_hex(t.as_bytes())),
            files: BTreeMap::new(),
        }
    }
}

/// Writes files into one output directory and records their digests.
pub struct OutputDir {
    root: PathBuf,
    pub manifest: RunManifest,
}

impl OutputDir {
    pub fn create(root: &Path, manifest: RunManifest) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        self.manifest.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// Writes `manifest_<command>.json` and returns the manifest.
    pub fn finish(self) -> Result<RunManifest, CliError> {
        let name = format!("manifest_{}.json", self.manifest.command);
        let mut s = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Format(e.to_string()))?;
        s.push('\n');
        let p = self.root.join(name);
        fs::write(&p, s).map_err(|e| CliError::io(&p, e))?;
        Ok(self.manifest)
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}
