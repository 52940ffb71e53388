//! Self-describing run directories.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

/// SHA-256 over `blob <len>\0<content>`, the object hashing scheme git uses.
pub fn content_hash(content: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: String,
    pub out_dir: PathBuf,
    pub duration_secs: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, snapshot: &str, out_dir: &Path) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: content_hash(snapshot),
            config: snapshot.to_string(),
            out_dir: out_dir.to_path_buf(),
            duration_secs: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Writes `config.toml` and `manifest.json` into the output directory.
    pub fn write(&self) -> Result<()> {
        let cfg = self.out_dir.join(CONFIG_FILE);
        fs::write(&cfg, &self.config).map_err(|e| Error::io(&cfg, e))?;
        let path = self.out_dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_git_object_hashing() {
        // Empty blob id in a sha256 git repository.
        assert_eq!(
            content_hash(""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("train", 4, "seed = 4\n", dir.path());
        m.outputs.push("episodes.csv".into());
        m.write().unwrap();
        assert_eq!(fs::read_to_string(dir.path().join(CONFIG_FILE)).unwrap(), "seed = 4\n");
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(v["seed"], 4);
        assert_eq!(v["config_hash"], content_hash("seed = 4\n"));
    }
}
