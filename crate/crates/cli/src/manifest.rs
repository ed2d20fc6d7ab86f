use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    /// SHA-256 of the effective config file written next to the manifest.
    pub config_hash: String,
    pub toolkit_version: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub seeds: Vec<u64>,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_bytes(cfg: &ExperimentConfig) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(cfg)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn describe_outputs(out: &Path, files: &[PathBuf]) -> Result<Vec<OutputFile>> {
    files
        .iter()
        .map(|f| {
            let bytes = std::fs::read(f)?;
            let name = f.strip_prefix(out).unwrap_or(f).display().to_string();
            Ok(OutputFile {
                file: name,
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            })
        })
        .collect()
}

/// Write `<command>_config.json` (the effective config, re-runnable with
/// `--config`) and `<command>_manifest.json` into `out`.
#[allow(clippy::too_many_arguments)]
pub fn write_manifest(
    out: &Path,
    run_id: &str,
    command: &str,
    cfg: &ExperimentConfig,
    seeds: Vec<u64>,
    files: &[PathBuf],
    started_unix: u64,
    wall_clock_seconds: f64,
) -> Result<RunManifest> {
    let cfg_bytes = config_bytes(cfg)?;
    std::fs::write(out.join(format!("{command}_config.json")), &cfg_bytes)?;
    let manifest = RunManifest {
        run_id: run_id.to_string(),
        command: command.to_string(),
        config_hash: sha256_hex(&cfg_bytes),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        wall_clock_seconds,
        seeds,
        outputs: describe_outputs(out, files)?,
    };
    std::fs::write(
        out.join(format!("{command}_manifest.json")),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}
