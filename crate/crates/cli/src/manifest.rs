use std::path::Path;

use anyhow::Context;
use inverse_lmp::dataset::sha256_hex;
use serde::Serialize;

/// `git describe` of the working tree the binary runs in, or `unknown`
/// outside a repository.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub git_describe: String,
    pub seeds: Vec<u64>,
    pub grid_name: Option<String>,
    pub grid_hash: Option<String>,
    pub config: serde_json::Value,
    /// `(file name, sha256)` of inputs read by the run.
    pub inputs: Vec<(String, String)>,
    /// `(path relative to the output directory, sha256)`, sorted by path.
    pub files: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &'static str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        RunManifest {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            git_describe: git_describe(),
            seeds,
            grid_name: None,
            grid_hash: None,
            config,
            inputs: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.inputs.push((name, sha256_hex(&bytes)));
        Ok(())
    }

    /// Hashes every listed output file and writes `manifest.json` into `dir`.
    pub fn write(mut self, dir: &Path, outputs: &[String]) -> anyhow::Result<()> {
        let mut outputs = outputs.to_vec();
        outputs.sort();
        for rel in outputs {
            let path = dir.join(&rel);
            let bytes = std::fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
            self.files.push((rel, sha256_hex(&bytes)));
        }
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&self)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

pub fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
}
