use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Everything needed to rerun a command, written next to its outputs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Full argument vector, program name excluded.
    pub args: Vec<String>,
    /// Effective configuration after defaults and flag overrides.
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    #[serde(default)]
    pub rng_seeds: Vec<u64>,
    #[serde(default)]
    pub catheters: Vec<CatheterRun>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CatheterRun {
    pub id: String,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            args: std::env::args().skip(1).collect(),
            config,
            inputs: Vec::new(),
            rng_seeds: Vec::new(),
            catheters: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Failure::Input(e.to_string()))?;
        fs::write(dir.join("manifest.json"), text).map_err(|e| Failure::io(&dir.join("manifest.json"), e))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        crate::io::load_json(path)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CatheterRun> {
        self.catheters.iter().filter(|c| c.error.is_some())
    }
}
