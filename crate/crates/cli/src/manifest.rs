use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn hash(role: &str, path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        Ok(Self {
            role: role.to_string(),
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Started,
    Complete,
    Failed,
}

/// Run record. No timestamps or host details, so identical runs produce
/// identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub status: Status,
    pub config: Value,
    pub resolved: Value,
    pub inputs: Vec<InputFile>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub results: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// An output directory with its manifest, written before any result.
pub struct RunDir {
    pub dir: PathBuf,
    manifest: RunManifest,
}

impl RunDir {
    pub fn start(
        dir: &Path,
        command: &'static str,
        config: Value,
        resolved: Value,
        inputs: Vec<InputFile>,
    ) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            status: Status::Started,
            config,
            resolved,
            inputs,
            outputs: Vec::new(),
            results: None,
            error: None,
        };
        let run = Self {
            dir: dir.to_path_buf(),
            manifest,
        };
        run.save()?;
        Ok(run)
    }

    fn save(&self) -> Result<()> {
        write_json(&self.dir.join(FILE_NAME), &self.manifest)
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn complete(mut self, results: Option<Value>) -> Result<()> {
        self.manifest.status = Status::Complete;
        self.manifest.results = results;
        self.save()
    }

    pub fn fail(mut self, error: &str) {
        self.manifest.status = Status::Failed;
        self.manifest.error = Some(error.to_string());
        // Best effort: the original error is what gets reported.
        let _ = self.save();
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
