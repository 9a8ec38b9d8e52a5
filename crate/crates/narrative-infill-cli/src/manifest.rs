//! Run manifests: a JSON record of what a command read, what it wrote
//! and under which settings, with SHA-256 checksums on both sides.
//! A manifest plus the binary version pins a run completely — same
//! inputs and seed reproduce the same artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use narrative_infill::model::ModelConfig;
use narrative_infill::synth::SynthConfig;
use narrative_infill::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Model/training configuration snapshot, for commands that take one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    pub inputs: BTreeMap<String, Artifact>,
    pub artifacts: BTreeMap<String, Artifact>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: None,
            config: None,
            synth: None,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    /// Inputs keep the path exactly as the user gave it.
    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        let artifact =
            Artifact { path: path.display().to_string(), sha256: sha256_file(path)? };
        self.inputs.insert(name.to_string(), artifact);
        Ok(())
    }

    pub fn artifact(&mut self, name: &str, path: &Path) -> Result<()> {
        self.artifacts.insert(name.to_string(), Artifact::of(path)?);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read manifest {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Check that a named artifact still has the recorded checksum.
    /// `base` is the directory the manifest lives in; recorded paths
    /// are resolved against it when relative.
    pub fn verify_artifact(&self, name: &str, base: &Path) -> Result<()> {
        let artifact = self.artifacts.get(name).ok_or_else(|| {
            Error::invalid(format!("manifest lists no artifact named {name:?}"))
        })?;
        let path = base.join(&artifact.path);
        let actual = sha256_file(&path)?;
        if actual != artifact.sha256 {
            return Err(Error::invalid(format!(
                "artifact {name:?} at {} does not match its manifest checksum \
                 (expected {}, found {actual}); was it modified?",
                path.display(),
                artifact.sha256
            )));
        }
        Ok(())
    }
}

impl Artifact {
    /// Records the file name only, not the full path: manifests stay
    /// valid when the run directory moves.
    pub fn of(path: &Path) -> Result<Artifact> {
        let name = path
            .file_name()
            .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
        Ok(Artifact {
            path: PathBuf::from(name).display().to_string(),
            sha256: sha256_file(path)?,
        })
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Sibling manifest path for a single-artifact command output:
/// `gen.jsonl` gets `gen.jsonl.manifest.json`.
pub fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
