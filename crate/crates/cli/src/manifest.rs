//! Run manifests: every input by content hash plus the exact settings used,
//! so a fit can be replayed.

use std::path::{Path, PathBuf};

use anyhow::Context;
use gfen::{AdmmOptions, PenaltyConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedInput {
    pub path: PathBuf,
    pub sha256: String,
}

impl HashedInput {
    pub fn of(path: &Path) -> anyhow::Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        })
    }

    /// Fails when the file changed since the manifest was written.
    pub fn verify(&self) -> anyhow::Result<()> {
        let now = sha256_file(&self.path)?;
        anyhow::ensure!(
            now == self.sha256,
            "{} changed since the manifest was written (sha256 {} != {})",
            self.path.display(),
            now,
            self.sha256
        );
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInputs {
    pub graph: HashedInput,
    pub tree: HashedInput,
    pub observations: HashedInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub command: String,
    pub version: String,
    pub inputs: FitInputs,
    /// One entry per split, or a single shared entry.
    pub penalties: Vec<PenaltyConfig>,
    pub solver: AdmmOptions,
    pub n_splits: usize,
    pub n_vertices: usize,
    pub outputs: Vec<HashedInput>,
}

impl FitManifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Manifest for commands without a replay mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<HashedInput>,
    pub settings: serde_json::Value,
    pub outputs: Vec<HashedInput>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            sha256_file(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let h = HashedInput::of(&p).unwrap();
        h.verify().unwrap();
        std::fs::write(&p, b"abd").unwrap();
        assert!(h.verify().is_err());
    }
}
