use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one run, written next to its outputs as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the configuration file bytes, or of the built-in default's name.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: &'static str,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Recorder {
    command: String,
    config_hash: String,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    started: Instant,
}

impl Recorder {
    pub fn new(command: &str, config_bytes: &[u8]) -> Recorder {
        Recorder {
            command: command.to_string(),
            config_hash: sha256_hex(config_bytes),
            seeds: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, s: u64) {
        self.seeds.push(s);
    }

    pub fn output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    pub fn finish(self, dir: &Path) -> std::io::Result<()> {
        let m = RunManifest {
            command: self.command,
            config_hash: self.config_hash,
            seeds: self.seeds,
            version: env!("CARGO_PKG_VERSION"),
            outputs: self.outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&m).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("manifest.json"), text + "\n")
    }
}
