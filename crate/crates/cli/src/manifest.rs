use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Origin, Override, ScenarioSpec, Settings};
use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// One convergence or consistency check made during a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, value: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    /// `ok`, or `failed` with `error` set and only partial outputs listed.
    pub status: String,
    pub error: Option<String>,
    pub config: Settings,
    pub origins: BTreeMap<String, Origin>,
    pub overrides: Vec<Override>,
    pub engines: BTreeMap<String, String>,
    pub workers: usize,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(spec: &ScenarioSpec, workers: usize) -> Self {
        let origins = spec.scenario.schema().into_iter().map(|p| (p.key.to_string(), p.origin)).collect();
        let mut engines = BTreeMap::new();
        engines.insert("mmrabi".to_string(), env!("CARGO_PKG_VERSION").to_string());
        engines.insert("mmrabi-core".to_string(), mmrabi_core::VERSION.to_string());
        Self {
            scenario: spec.scenario.id().into(),
            status: "ok".into(),
            error: None,
            config: spec.settings.clone(),
            origins,
            overrides: spec.overrides.clone(),
            engines,
            workers,
            wall_time_s: 0.0,
            checks: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("manifest: {e}")))
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes output files and records their digests.
pub struct OutputDir {
    pub dir: PathBuf,
    pub files: Vec<OutputFile>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.retain(|f| f.path != name);
        self.files.push(OutputFile { path: name.into(), sha256: sha256_hex(contents.as_bytes()), bytes: contents.len() as u64 });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))? + "\n";
        self.write(name, &text)
    }
}
