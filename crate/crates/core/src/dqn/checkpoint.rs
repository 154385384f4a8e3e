//! JSON checkpoints of a [`Trainer`] taken between episodes.
//!
//! Weight arrays use the [`Mlp`](super::Mlp) layout: for each layer in order
//! from input to output, the input-major weight block then the bias.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{Adam, DqnConfig, DqnError, Mlp, QNetwork, ReplayBuffer, Trainer, TrainingLog};
use crate::env::{DosingEnv, EnvConfig};

pub const SCHEMA: &str = "fracdose.dqn-checkpoint";
pub const VERSION: u32 = 1;

/// ChaCha8 position: 32-byte key as hex, stream id, and word position
/// (a u128, stored as a decimal string).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng, DqnError> {
        let bad = |m: &str| DqnError::Schema(format!("rng state: {m}"));
        if self.seed.len() != 64 {
            return Err(bad("seed must be 64 hex digits"));
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&self.seed[2 * i..2 * i + 2], 16).map_err(|_| bad("seed is not hex"))?;
        }
        let word_pos: u128 = self.word_pos.parse().map_err(|_| bad("word_pos is not an integer"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema: String,
    pub version: u32,
    pub crate_version: String,
    pub dqn_config: DqnConfig,
    pub env_config: EnvConfig,
    pub layer_sizes: Vec<usize>,
    pub input_scale: f64,
    pub online: Vec<f64>,
    pub target: Vec<f64>,
    pub optimizer: Adam,
    pub rng: RngState,
    pub env_steps: u64,
    pub gradient_steps: u64,
    pub replay: ReplayBuffer,
    pub log: TrainingLog,
}

impl Checkpoint {
    pub fn capture(t: &Trainer) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            version: VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            dqn_config: t.cfg.clone(),
            env_config: t.env_cfg,
            layer_sizes: t.online.mlp.sizes().to_vec(),
            input_scale: t.online.input_scale,
            online: t.online.mlp.params().to_vec(),
            target: t.target.mlp.params().to_vec(),
            optimizer: t.optimizer.clone(),
            rng: RngState::capture(&t.rng),
            env_steps: t.env_steps,
            gradient_steps: t.gradient_steps,
            replay: t.replay.clone(),
            log: t.log.clone(),
        }
    }

    /// The online network alone, for evaluation.
    pub fn network(&self) -> Result<QNetwork, DqnError> {
        Ok(QNetwork {
            mlp: Mlp::from_params(&self.layer_sizes, self.online.clone())?,
            input_scale: self.input_scale,
        })
    }

    pub fn restore(self) -> Result<Trainer, DqnError> {
        self.dqn_config.validate()?;
        let online = self.network()?;
        let target = QNetwork {
            mlp: Mlp::from_params(&self.layer_sizes, self.target)?,
            input_scale: self.input_scale,
        };
        if online.inputs() != self.env_config.frames {
            return Err(DqnError::Schema(format!(
                "network takes {} inputs but the environment stacks {} frames",
                online.inputs(),
                self.env_config.frames
            )));
        }
        let n = online.mlp.params().len();
        if self.optimizer.m.len() != n || self.optimizer.v.len() != n {
            return Err(DqnError::Schema("optimizer moments do not match the network".into()));
        }
        Ok(Trainer {
            env: DosingEnv::new(self.env_config)?,
            rng: self.rng.restore()?,
            cfg: self.dqn_config,
            env_cfg: self.env_config,
            online,
            target,
            optimizer: self.optimizer,
            replay: self.replay,
            env_steps: self.env_steps,
            gradient_steps: self.gradient_steps,
            log: self.log,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    /// Parses a checkpoint, rejecting unknown schemas and versions before
    /// looking at the body.
    pub fn from_json(text: &str) -> Result<Self, DqnError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| DqnError::Schema(format!("not JSON: {e}")))?;
        match value.get("schema").and_then(|s| s.as_str()) {
            Some(SCHEMA) => {}
            Some(other) => return Err(DqnError::Schema(format!("unknown schema {other:?}"))),
            None => return Err(DqnError::Schema("missing schema id".into())),
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == VERSION as u64 => {}
            Some(v) => return Err(DqnError::Schema(format!("unsupported version {v}, expected {VERSION}"))),
            None => return Err(DqnError::Schema("missing version".into())),
        }
        serde_json::from_value(value).map_err(|e| DqnError::Schema(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), DqnError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DqnError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
