use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;

use crate::usage;

/// Reads a TOML or JSON configuration (by extension; `.json` is JSON,
/// anything else TOML). No path means every field takes its default.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("invalid JSON config {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("invalid TOML config {}", path.display()))?
    };
    Ok(parsed)
}

/// Resolves a path from a config file relative to that file's directory.
pub fn resolve(config: Option<&Path>, path: &Path) -> PathBuf {
    match config.and_then(Path::parent) {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// Reads a seed list: `{"seeds": [..]}` or a bare JSON array.
pub fn read_seeds(path: &Path) -> anyhow::Result<Vec<u64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read seed list {}", path.display()))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("invalid seed list {}", path.display()))?;
    let list = v.get("seeds").unwrap_or(&v);
    let seeds = list
        .as_array()
        .ok_or_else(|| usage(format!("{}: expected a JSON array of seeds", path.display())))?
        .iter()
        .map(|s| s.as_u64().ok_or_else(|| usage(format!("{}: seed {s} is not a non-negative integer", path.display()))))
        .collect::<anyhow::Result<Vec<u64>>>()?;
    if seeds.is_empty() {
        return Err(usage(format!("{}: empty seed list", path.display())));
    }
    Ok(seeds)
}
