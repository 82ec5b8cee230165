//! Reproducibility manifests written next to every output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliResult, PathContext};
use crate::io::{write_json, FORMAT_VERSION};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).at(path, "read")?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn digests(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
    paths.iter().map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: sha256_file(p)? })).collect()
}

/// Where the manifest of `out` goes: inside it for a directory, beside it otherwise.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

/// Hashes `inputs` and `outputs` and writes the manifest for `out`.
pub fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &PipelineConfig,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
) -> CliResult<PathBuf> {
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: cfg.seed,
        config_sha256: cfg.digest(),
        config: cfg.clone(),
        inputs: digests(inputs)?,
        outputs: digests(outputs)?,
    };
    let path = manifest_path(out);
    write_json(&path, &manifest)?;
    Ok(path)
}
