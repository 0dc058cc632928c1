use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::{self, IoError};

/// Record of one successful run, sufficient to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    /// sha256 of every input file, keyed by path.
    pub input_digests: BTreeMap<String, String>,
    pub outputs: Vec<OutputEntry>,
    /// Extra derived quantities (Lipschitz constants, ranks, ...).
    #[serde(default)]
    pub report: serde_json::Value,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(subcommand: &str, parameters: serde_json::Value) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            parameters,
            seeds: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            outputs: Vec::new(),
            report: serde_json::Value::Null,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn record_output(&mut self, path: &str, bytes: &[u8]) {
        self.outputs.push(OutputEntry {
            path: path.to_string(),
            sha256: io::sha256_hex(bytes),
        });
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = io::read_text(path)?;
        io::parse_json(path, &text)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        io::write_atomic(path, text.as_bytes())
    }

    /// Parameters as the typed struct of the subcommand.
    pub fn parameters<T: serde::de::DeserializeOwned>(&self, path: &Path) -> Result<T, IoError> {
        serde_json::from_value(self.parameters.clone()).map_err(|e| IoError::Parse {
            path: path.to_path_buf(),
            pointer: "/parameters".into(),
            message: e.to_string(),
        })
    }
}
