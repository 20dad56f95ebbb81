//! Atomic output sets and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn hash_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn temp_name(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = temp_name(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Files produced by one command, keyed by path relative to the output
/// directory. Nothing touches the disk until [`OutputSet::commit`].
#[derive(Default)]
pub struct OutputSet {
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, rel: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(rel.into(), bytes.into());
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Stages every file as a temp file, then renames them all into place.
    /// A failure while staging removes the temp files and leaves `out`
    /// untouched. Returns the SHA-256 of each file as read back from disk.
    pub fn commit(&self, out: &Path) -> Result<BTreeMap<String, String>> {
        let mut staged = Vec::new();
        let stage = |staged: &mut Vec<(PathBuf, PathBuf)>| -> Result<()> {
            for (rel, bytes) in &self.files {
                let path = out.join(rel);
                if let Some(dir) = path.parent() {
                    fs::create_dir_all(dir)?;
                }
                let tmp = temp_name(&path);
                fs::write(&tmp, bytes)?;
                staged.push((tmp, path));
            }
            Ok(())
        };
        if let Err(e) = stage(&mut staged) {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
            return Err(e);
        }
        for (tmp, path) in &staged {
            fs::rename(tmp, path)?;
        }
        let mut hashes = BTreeMap::new();
        for (rel, bytes) in &self.files {
            let on_disk = hash_file(&out.join(rel))?;
            if on_disk != sha256_hex(bytes) {
                return Err(Error::Contract(format!("{rel} changed after writing")));
            }
            hashes.insert(rel.clone(), on_disk);
        }
        Ok(hashes)
    }
}

/// Record of one successful command. The file name is
/// `manifest_<command>.json` inside the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub out_dir: String,
    /// SHA-256 per output file, keyed by path relative to `out_dir`.
    pub artifacts: BTreeMap<String, String>,
    pub wall_seconds: f64,
    /// Cumulative wall time per training epoch, `train` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch_wall_seconds: Option<Vec<f64>>,
    pub version: String,
}

impl RunManifest {
    pub fn file_name(command: &str) -> String {
        format!("manifest_{command}.json")
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let path = out.join(Self::file_name(&self.command));
        let json =
            serde_json::to_string_pretty(self).map_err(|e| Error::Contract(e.to_string()))?;
        write_atomic(&path, format!("{json}\n").as_bytes())?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::load(path, None, e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| Error::load(path, Some(e.line()), e.to_string()))
    }

    /// Re-hashes every listed artifact under `dir`, the directory holding
    /// the manifest.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        if self.artifacts.is_empty() {
            return Err(Error::Contract("manifest lists no artifacts".into()));
        }
        for (rel, expected) in &self.artifacts {
            let actual = hash_file(&dir.join(rel))
                .map_err(|e| Error::Contract(format!("artifact {rel}: {e}")))?;
            if &actual != expected {
                return Err(Error::Contract(format!(
                    "artifact {rel} does not match its hash"
                )));
            }
        }
        Ok(())
    }
}
