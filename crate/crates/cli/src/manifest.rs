//! Run manifests: what a command read, what it wrote, and content hashes
//! for both.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_paths: Vec<String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub seed: u64,
    pub version: String,
    /// Seconds since the epoch from `SOURCE_DATE_EPOCH`, 0 when unset.
    pub timestamp: u64,
    pub details: BTreeMap<String, serde_json::Value>,
}

pub fn sha256_file(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Collects manifest entries; paths under `base` are stored relative to it so
/// manifests do not depend on where a run was placed.
pub struct ManifestBuilder {
    base: PathBuf,
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn new(command: &str, seed: u64, base: &Path) -> ManifestBuilder {
        ManifestBuilder {
            base: base.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                config_paths: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                timestamp: timestamp(),
                details: BTreeMap::new(),
            },
        }
    }

    fn display(&self, path: &Path) -> String {
        path.strip_prefix(&self.base)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn digest(&self, path: &Path) -> Result<FileDigest, Failure> {
        Ok(FileDigest {
            path: self.display(path),
            sha256: sha256_file(path)?,
        })
    }

    pub fn config(&mut self, path: &Path) -> Result<(), Failure> {
        self.manifest.config_paths.push(self.display(path));
        let d = self.digest(path)?;
        self.manifest.inputs.push(d);
        Ok(())
    }

    pub fn input(&mut self, path: &Path) -> Result<(), Failure> {
        let d = self.digest(path)?;
        self.manifest.inputs.push(d);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), Failure> {
        let d = self.digest(path)?;
        self.manifest.outputs.push(d);
        Ok(())
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) -> Result<(), Failure> {
        let v = serde_json::to_value(value).map_err(vocscreen::Error::from)?;
        self.manifest.details.insert(key.to_string(), v);
        Ok(())
    }

    /// Writes the manifest to `path` and returns it.
    pub fn finish(self, path: &Path) -> Result<RunManifest, Failure> {
        crate::io::write_json(path, &self.manifest)?;
        Ok(self.manifest)
    }
}
