use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";
pub const MANIFEST_VERSION: u32 = 1;

/// Artifact names inside the state directory.
pub const SAMPLES: &str = "samples.json";
pub const GRID_RESULTS: &str = "grid_results.csv";
pub const GRID_SUMMARY: &str = "grid_summary.json";
pub const MODEL: &str = "model.json";
pub const TRAIN_TRACE: &str = "train_trace.csv";
pub const IMPORTANCE: &str = "importance.csv";

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::state(format!("cannot read {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance of one artifact: the command and seed that produced it, the
/// digests of the artifacts it was derived from and its own digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub sha256: String,
    pub command: String,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self { format_version: MANIFEST_VERSION, artifacts: BTreeMap::new() }
    }
}

/// Exclusive handle on a pipeline-state directory; the lock file is removed
/// when the handle is dropped.
#[derive(Debug)]
pub struct StateDir {
    root: PathBuf,
    lock: Option<PathBuf>,
    pub manifest: Manifest,
}

impl StateDir {
    /// Opens (creating if needed) and locks `root`.
    pub fn lock(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root)?;
        let lock = root.join(LOCK_FILE);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&lock).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                CliError::state(format!("{} is locked by another invocation ({})", root.display(), lock.display()))
            } else {
                e.into()
            }
        })?;
        writeln!(f, "{}", std::process::id())?;
        let mut state = Self { root: root.to_path_buf(), lock: Some(lock), manifest: Manifest::default() };
        state.manifest = state.read_manifest()?;
        Ok(state)
    }

    /// Read-only view without taking the lock.
    pub fn open_read_only(root: &Path) -> CliResult<Self> {
        if !root.is_dir() {
            return Err(CliError::state(format!("state directory {} does not exist", root.display())));
        }
        let mut state = Self { root: root.to_path_buf(), lock: None, manifest: Manifest::default() };
        state.manifest = state.read_manifest()?;
        Ok(state)
    }

    fn read_manifest(&self) -> CliResult<Manifest> {
        let path = self.root.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        if manifest.format_version != MANIFEST_VERSION {
            return Err(CliError::state(format!("unsupported manifest version {}", manifest.format_version)));
        }
        Ok(manifest)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Manifest entry of `name` after checking the file still has the
    /// recorded digest.
    pub fn verified(&self, name: &str) -> CliResult<&ArtifactEntry> {
        let entry = self
            .manifest
            .artifacts
            .get(name)
            .ok_or_else(|| CliError::state(format!("missing artifact {name}; run the producing command first")))?;
        let actual = sha256_file(&self.path(name))?;
        if actual != entry.sha256 {
            return Err(CliError::state(format!("{name} was modified after it was recorded in the manifest")));
        }
        Ok(entry)
    }

    /// Records `name` (already written) and persists the manifest.
    pub fn record(
        &mut self,
        name: &str,
        command: &str,
        seed: Option<u64>,
        inputs: BTreeMap<String, String>,
        params: serde_json::Value,
    ) -> CliResult<()> {
        let sha256 = sha256_file(&self.path(name))?;
        self.manifest
            .artifacts
            .insert(name.to_string(), ArtifactEntry { sha256, command: command.to_string(), seed, inputs, params });
        self.save_manifest()
    }

    /// Drops entries derived from `name` when it is regenerated.
    pub fn invalidate_dependents(&mut self, name: &str) {
        let mut stale = vec![name.to_string()];
        while let Some(n) = stale.pop() {
            let deps: Vec<String> = self
                .manifest
                .artifacts
                .iter()
                .filter(|(_, e)| e.inputs.contains_key(&n))
                .map(|(k, _)| k.clone())
                .collect();
            for d in deps {
                self.manifest.artifacts.remove(&d);
                stale.push(d);
            }
        }
    }

    fn save_manifest(&self) -> CliResult<()> {
        let mut f = File::create(self.path(MANIFEST_FILE))?;
        f.write_all(serde_json::to_string_pretty(&self.manifest)?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

impl Drop for StateDir {
    fn drop(&mut self) {
        if let Some(lock) = &self.lock {
            let _ = std::fs::remove_file(lock);
        }
    }
}
