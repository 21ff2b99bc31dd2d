use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliResult;

/// Everything that determines a run's metric files. Embedded in every
/// metrics JSON; timestamps live only in `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    /// Input path → SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize, seed: u64) -> CliResult<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: BTreeMap::new(),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = fs::read(path)?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Serialize)]
struct ManifestFile<'a> {
    #[serde(flatten)]
    manifest: &'a RunManifest,
    started_unix: u64,
    finished_unix: u64,
    /// Files written by the run, relative to the output directory.
    outputs: &'a [String],
}

/// Writes `manifest.json` next to the run's outputs.
pub fn write_manifest_file(dir: &Path, manifest: &RunManifest, started: u64, outputs: &[String]) -> CliResult<PathBuf> {
    let file = ManifestFile {
        manifest,
        started_unix: started,
        finished_unix: unix_seconds(),
        outputs,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&file)? + "\n")?;
    Ok(path)
}
