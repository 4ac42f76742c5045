use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

/// Everything needed to reproduce a run: feed this file back through
/// `--config` to regenerate identical CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub version: String,
    pub config_path: String,
    pub config_sha256: String,
    pub config_text: String,
    /// Master seed actually used, after any `--seed` override.
    pub master_seed: u64,
    pub seed_override: Option<u64>,
    pub workers: usize,
    #[serde(default)]
    pub data_path: Option<String>,
    #[serde(default)]
    pub data_sha256: Option<String>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// The config as loaded: TOML text plus the directory relative paths resolve
/// against.
pub struct LoadedConfig {
    pub text: String,
    pub base_dir: PathBuf,
    pub path: PathBuf,
    /// Seed recorded in a manifest being replayed.
    pub replay_seed: Option<u64>,
}

pub fn load_config(path: &Path, subcommand: &str) -> Result<LoadedConfig, Failure> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
    let path = &std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if path.extension().is_some_and(|e| e == "json") {
        let m: Manifest = serde_json::from_str(&raw)
            .map_err(|e| Failure::Validation(format!("{}: not a run manifest: {e}", path.display())))?;
        if m.subcommand != subcommand {
            return Err(Failure::Validation(format!(
                "manifest was written by `{}`, not `{subcommand}`",
                m.subcommand
            )));
        }
        if sha256_hex(m.config_text.as_bytes()) != m.config_sha256 {
            return Err(Failure::Validation("manifest config_text does not match config_sha256".into()));
        }
        // Relative data paths stay relative to the original config.
        let original = PathBuf::from(&m.config_path);
        let base_dir = original.parent().map(Path::to_path_buf).unwrap_or(base_dir);
        return Ok(LoadedConfig { text: m.config_text, base_dir, path: original, replay_seed: Some(m.master_seed) });
    }
    Ok(LoadedConfig { text: raw, base_dir, path: path.to_path_buf(), replay_seed: None })
}
