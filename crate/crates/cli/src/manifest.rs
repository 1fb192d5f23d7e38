//! Per-run manifest: what ran, with which seeds, and content hashes of every
//! file read or written.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub seeds: Vec<(String, u64)>,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub tool_version: String,
    pub duration_secs: f64,
}

pub fn hash_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: 0.0,
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.push((name.to_string(), value));
    }

    fn artifact(path: &Path) -> std::io::Result<Artifact> {
        Ok(Artifact { path: path.to_path_buf(), sha256: hash_file(path)? })
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<()> {
        self.inputs.push(Self::artifact(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> std::io::Result<()> {
        self.outputs.push(Self::artifact(path)?);
        Ok(())
    }

    pub fn finish(&mut self, elapsed: Duration) {
        self.duration_secs = elapsed.as_secs_f64();
    }
}
