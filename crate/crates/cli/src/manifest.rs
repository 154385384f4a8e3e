use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MANIFEST_SCHEMA: &str = "fracdose.run-manifest";
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Trajectory,
    Summary,
    Sweep,
    SweepBest,
    Checkpoint,
    TrainingLog,
    DeltaSweep,
    DeltaSweepRuns,
    CostTable,
    PulseFrequency,
    MeanFraction,
    CostVsDelta,
}

/// One file written by a command, relative to the artifact directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub kind: OutputKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Episode cost of a trajectory file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

impl OutputFile {
    pub fn new(path: impl Into<PathBuf>, kind: OutputKind) -> Self {
        Self {
            path: path.into(),
            kind,
            policy: None,
            mu: None,
            delta: None,
            cost: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema: String,
    pub version: u32,
    pub command: String,
    /// Full command line, for repeating the run with `--config <manifest>`.
    pub argv: Vec<String>,
    pub config: RunConfig,
    pub seed: u64,
    pub crate_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn begin(command: &str, config: &RunConfig) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            version: MANIFEST_VERSION,
            command: command.into(),
            argv: std::env::args().collect(),
            config: config.clone(),
            seed: config.dqn.seed,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            started_at: timestamp(),
            finished_at: String::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_at = timestamp();
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("no run manifest at {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let schema = value.get("schema").and_then(|s| s.as_str());
        let version = value.get("version").and_then(|v| v.as_u64());
        if schema != Some(MANIFEST_SCHEMA) || version != Some(MANIFEST_VERSION as u64) {
            bail!(
                "{}: expected {MANIFEST_SCHEMA} version {MANIFEST_VERSION}, found {:?} version {:?}",
                path.display(),
                schema,
                version
            );
        }
        serde_json::from_value(value).with_context(|| format!("parsing {}", path.display()))
    }
}
