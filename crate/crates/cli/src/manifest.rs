use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Run description written before any result. It holds no timestamps, host
/// names or thread counts, so equal manifests mean equal outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: Value,
    /// Output file names, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &'static str, seed: u64, config: Value, outputs: Vec<String>) -> Self {
        RunManifest { subcommand, version: env!("CARGO_PKG_VERSION"), seed, config, outputs }
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}
