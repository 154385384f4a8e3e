//! Run configuration: one JSON document, comments allowed.

use std::fs;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fracdose::baselines::SweepGrid;
use fracdose::dqn::DqnConfig;
use fracdose::{EnvConfig, ModelParams, PopulationState};
use json_comments::StripComments;
use serde::{Deserialize, Serialize};

use crate::manifest::MANIFEST_SCHEMA;

/// Environment settings; the model lives in its own section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub delta: f64,
    pub frames: usize,
    pub x0: PopulationState,
    pub horizon: usize,
    pub terminate_on_growth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaSweepSection {
    pub deltas: Vec<f64>,
    /// Trained agents per step size; the best one is reported.
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub env: EnvSection,
    pub dqn: DqnConfig,
    pub sweep: SweepGrid,
    pub delta_sweep: DeltaSweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            model: env.params,
            env: EnvSection {
                delta: env.delta,
                frames: env.frames,
                x0: env.x0,
                horizon: env.horizon,
                terminate_on_growth: env.terminate_on_growth,
            },
            dqn: DqnConfig::default(),
            sweep: SweepGrid::default(),
            delta_sweep: DeltaSweepSection {
                deltas: vec![0.01, 0.02, 0.05, 0.1, 0.2],
                runs: 5,
            },
        }
    }
}

impl RunConfig {
    /// Reads a config file, or the resolved config stored in a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut stripped = String::new();
        StripComments::new(text.as_bytes()).read_to_string(&mut stripped)?;
        let mut value: serde_json::Value = serde_json::from_str(&stripped)?;
        if value.get("schema").and_then(|s| s.as_str()) == Some(MANIFEST_SCHEMA) {
            value = value
                .get_mut("config")
                .map(serde_json::Value::take)
                .context("manifest has no config")?;
        }
        let cfg: RunConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.env_config().validate()?;
        self.dqn.validate()?;
        self.sweep.pairs()?;
        if self.delta_sweep.runs == 0 {
            bail!("delta_sweep.runs must be at least 1");
        }
        if let Some(d) = self.delta_sweep.deltas.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            bail!("delta_sweep.deltas must be positive, got {d}");
        }
        Ok(())
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            delta: self.env.delta,
            frames: self.env.frames,
            x0: self.env.x0,
            horizon: self.env.horizon,
            terminate_on_growth: self.env.terminate_on_growth,
            params: self.model,
        }
    }

    pub fn set_mu(&mut self, mu: f64) {
        self.model.mu = mu;
    }

    /// Changes the step size, keeping the simulated duration.
    pub fn set_delta(&mut self, delta: f64) {
        let env = self.env_config().with_delta(delta);
        self.env.delta = env.delta;
        self.env.horizon = env.horizon;
    }
}
