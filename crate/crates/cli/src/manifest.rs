//! Run manifests: everything needed to replay a subcommand bit-exactly.

use std::path::{Path, PathBuf};

use fracfb::config::RunConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    /// Subcommand arguments beyond the global flags.
    pub args: serde_json::Value,
    pub tool_version: String,
    pub field_schema: u32,
    pub report_schema: u32,
    pub config_sha256: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> CliResult<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| CliError::artifact(path, e))?;
    Ok(FileDigest {
        path: path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn new(
        command: &str,
        args: serde_json::Value,
        config: &RunConfig,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> CliResult<Self> {
        Ok(Manifest {
            manifest_version: MANIFEST_VERSION,
            command: command.to_string(),
            args,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            field_schema: fracfb::field::FIELD_VERSION,
            report_schema: fracfb::freeboundary::REPORT_SCHEMA_VERSION,
            config_sha256: sha256_hex(config.to_json()?.as_bytes()),
            seed: config.seed,
            config: config.clone(),
            inputs: inputs.iter().map(|p| digest_file(p)).collect::<CliResult<_>>()?,
            outputs: outputs.iter().map(|p| digest_file(p)).collect::<CliResult<_>>()?,
        })
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(format!("manifest.{}.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

/// Reads a run configuration, accepting either a bare config or a manifest.
pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::artifact(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if let Some(v) = value.get("manifest_version").and_then(|v| v.as_u64()) {
        if v as u32 != MANIFEST_VERSION {
            return Err(fracfb::Error::SchemaMismatch {
                expected: MANIFEST_VERSION,
                found: v as u32,
            }
            .into());
        }
        let cfg = value
            .get("config")
            .cloned()
            .ok_or_else(|| CliError::Usage("manifest has no config section".into()))?;
        return Ok(serde_json::from_value(cfg)?);
    }
    Ok(serde_json::from_value(value)?)
}
