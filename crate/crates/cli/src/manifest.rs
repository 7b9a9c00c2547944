use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to regenerate a command's outputs byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Full configuration snapshot the command ran with.
    pub config: serde_json::Value,
    pub seed: u64,
    pub outputs: Vec<OutputEntry>,
    /// SHA-256 of the primary output (counters, report or key list).
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// In-memory outputs of one command.
pub struct Run {
    pub command: &'static str,
    pub config: serde_json::Value,
    pub seed: u64,
    pub outputs: Vec<(String, Vec<u8>)>,
    /// Index into `outputs` of the file the digest covers.
    pub primary: usize,
}

impl Run {
    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: self.command.to_owned(),
            config: self.config.clone(),
            seed: self.seed,
            outputs: self
                .outputs
                .iter()
                .map(|(path, data)| OutputEntry {
                    path: path.clone(),
                    sha256: sha256_hex(data),
                    bytes: data.len(),
                })
                .collect(),
            digest: sha256_hex(&self.outputs[self.primary].1),
        }
    }

    /// Writes every output and the manifest under `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::new();
        for (name, data) in &self.outputs {
            let p = dir.join(name);
            fs::write(&p, data).map_err(|e| CliError::io(&p, e))?;
            written.push(p);
        }
        let p = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        text.push('\n');
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        written.push(p);
        Ok(written)
    }
}

/// Names of outputs whose regenerated bytes differ from the manifest.
pub fn mismatches(recorded: &RunManifest, rerun: &RunManifest) -> Vec<String> {
    let mut out = Vec::new();
    for entry in &recorded.outputs {
        match rerun.outputs.iter().find(|o| o.path == entry.path) {
            Some(o) if o.sha256 == entry.sha256 => {}
            Some(_) => out.push(entry.path.clone()),
            None => out.push(format!("{} (not produced)", entry.path)),
        }
    }
    if recorded.digest != rerun.digest {
        out.push("digest".to_owned());
    }
    out
}
