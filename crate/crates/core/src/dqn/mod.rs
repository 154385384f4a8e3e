//! Double DQN: Q-network, replay, epsilon-greedy exploration and the
//! Bellman-residual update.

pub mod checkpoint;
pub mod network;
pub mod replay;
pub mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{evaluate_policy, Controller, Evaluation, ObservationPolicy};
use crate::env::{Action, EnvConfig, EnvError, Observation};

pub use checkpoint::Checkpoint;
pub use network::{Adam, AdamConfig, Mlp};
pub use replay::{ReplayBuffer, Transition};
pub use train::{train_agent, EpisodeRecord, Trainer, TrainingLog};

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite loss {loss} at gradient step {step}")]
    NonFiniteLoss { loss: f64, step: u64 },
    #[error("invalid DQN config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint schema error: {0}")]
    Schema(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Env(#[from] EnvError),
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_polyak() -> f64 {
    1.0
}
fn default_input_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqnConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    /// Gradient steps between target-network updates.
    pub target_update_interval: u64,
    /// Fraction of the online weights blended into the target at each
    /// update; 1 is a hard copy.
    #[serde(default = "default_polyak")]
    pub polyak_tau: f64,
    pub learning_starts: u64,
    pub total_steps: u64,
    pub buffer_size: usize,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    /// Time constant of the exponential epsilon decay, in environment steps.
    pub epsilon_decay_steps: f64,
    pub gradient_steps_per_env_step: usize,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    /// Multiplies observations before the first layer.
    #[serde(default = "default_input_scale")]
    pub input_scale: f64,
    #[serde(default)]
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        let total_steps = 300_000;
        Self {
            batch_size: 32,
            learning_rate: 3.6e-4,
            gamma: 0.999,
            target_update_interval: 1_000,
            polyak_tau: 1.0,
            learning_starts: 10_000,
            total_steps,
            buffer_size: 100_000,
            epsilon_start: 1.0,
            epsilon_floor: 0.05,
            epsilon_decay_steps: total_steps as f64 / 10.0,
            gradient_steps_per_env_step: 1,
            hidden: default_hidden(),
            input_scale: default_input_scale(),
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl DqnConfig {
    /// `1 / (1 - gamma)`, in environment steps.
    pub fn effective_horizon(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// Sets `total_steps` and rescales the epsilon time constant with it.
    pub fn with_total_steps(mut self, total_steps: u64) -> Self {
        self.total_steps = total_steps;
        self.epsilon_decay_steps = total_steps as f64 / 10.0;
        self
    }

    pub fn validate(&self) -> Result<(), DqnError> {
        let fail = |m: String| Err(DqnError::InvalidConfig(m));
        if self.batch_size == 0 || self.buffer_size == 0 {
            return fail("batch and buffer sizes must be positive".into());
        }
        if !(self.learning_rate > 0.0) {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.target_update_interval == 0 || self.total_steps == 0 {
            return fail("target interval and total steps must be positive".into());
        }
        if !(self.polyak_tau > 0.0 && self.polyak_tau <= 1.0) {
            return fail(format!("polyak tau must lie in (0, 1], got {}", self.polyak_tau));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_floor)
            || !(self.epsilon_decay_steps > 0.0)
        {
            return fail("epsilon schedule out of range".into());
        }
        if self.gradient_steps_per_env_step == 0 || self.hidden.contains(&0) {
            return fail("gradient steps and hidden widths must be positive".into());
        }
        if !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return fail(format!("input scale must be positive, got {}", self.input_scale));
        }
        Ok(())
    }
}

/// Action-value network: observation (length K) to one value per dose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    pub mlp: Mlp,
    pub input_scale: f64,
}

impl QNetwork {
    pub fn layer_sizes(frames: usize, hidden: &[usize]) -> Vec<usize> {
        let mut sizes = vec![frames];
        sizes.extend_from_slice(hidden);
        sizes.push(Action::ALL.len());
        sizes
    }

    pub fn random<R: Rng>(frames: usize, cfg: &DqnConfig, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::random(&Self::layer_sizes(frames, &cfg.hidden), rng),
            input_scale: cfg.input_scale,
        }
    }

    pub fn from_mlp(mlp: Mlp) -> Self {
        Self {
            mlp,
            input_scale: 1.0,
        }
    }

    pub fn inputs(&self) -> usize {
        self.mlp.inputs()
    }

    fn scaled(&self, obs: &[f64]) -> Vec<f64> {
        obs.iter().map(|x| x * self.input_scale).collect()
    }

    fn values(&self, obs: &[f64]) -> Vec<f64> {
        self.mlp.forward(&self.scaled(obs))
    }
}

fn check_len(net: &QNetwork, obs: &[f64]) -> Result<(), DqnError> {
    if obs.len() != net.inputs() {
        return Err(DqnError::Shape(format!(
            "observation has {} entries, network expects {}",
            obs.len(),
            net.inputs()
        )));
    }
    Ok(())
}

/// Action values for one observation.
pub fn q_forward(net: &QNetwork, obs: &[f64]) -> Result<Vec<f64>, DqnError> {
    check_len(net, obs)?;
    Ok(net.values(obs))
}

/// Index of the largest value; ties go to the lowest index (pause).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `max(floor, eps0 * exp(-step / tau))`.
pub fn epsilon_at(step: u64, cfg: &DqnConfig) -> f64 {
    (cfg.epsilon_start * (-(step as f64) / cfg.epsilon_decay_steps).exp()).max(cfg.epsilon_floor)
}

/// Epsilon-greedy choice. One uniform draw decides whether to explore; a
/// second draw picks the random action only when exploring.
pub fn act<R: Rng>(net: &QNetwork, obs: &[f64], epsilon: f64, rng: &mut R) -> Result<Action, DqnError> {
    check_len(net, obs)?;
    let explore = rng.gen::<f64>() < epsilon;
    let index = if explore {
        rng.gen_range(0..Action::ALL.len())
    } else {
        argmax(&net.values(obs))
    };
    Ok(Action::ALL[index])
}

/// `y = r + gamma (1 - done) Q_target(s', argmax_a Q_online(s', a))`.
pub fn double_q_targets(
    batch: &[&Transition],
    online: &QNetwork,
    target: &QNetwork,
    gamma: f64,
) -> Vec<f64> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                return t.reward;
            }
            let a = argmax(&online.values(&t.next_observation));
            t.reward + gamma * target.values(&t.next_observation)[a]
        })
        .collect()
}

/// Mean squared Bellman residual over the batch and its parameter gradient.
/// `targets` are constants.
pub fn loss_and_gradient(net: &QNetwork, batch: &[&Transition], targets: &[f64]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; net.mlp.params().len()];
    let mut acts = network::Activations::default();
    let mut grad_out = vec![0.0; net.mlp.outputs()];
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        net.mlp.forward_into(&net.scaled(&t.observation), &mut acts);
        let residual = acts.output()[t.action] - y;
        loss += residual * residual;
        grad_out.iter_mut().for_each(|g| *g = 0.0);
        grad_out[t.action] = 2.0 * residual / n;
        net.mlp.backward(&acts, &grad_out, &mut grad);
    }
    (loss / n, grad)
}

/// One Adam update on the Bellman residual; returns the pre-update loss.
pub fn gradient_step(
    net: &mut QNetwork,
    batch: &[&Transition],
    targets: &[f64],
    optimizer: &mut Adam,
    lr: f64,
) -> Result<f64, DqnError> {
    if batch.is_empty() || batch.len() != targets.len() {
        return Err(DqnError::Shape(format!(
            "batch of {} transitions with {} targets",
            batch.len(),
            targets.len()
        )));
    }
    let (loss, grad) = loss_and_gradient(net, batch, targets);
    if !loss.is_finite() {
        return Err(DqnError::NonFiniteLoss {
            loss,
            step: optimizer.t + 1,
        });
    }
    optimizer.step(net.mlp.params_mut(), &grad, lr);
    Ok(loss)
}

/// Greedy (epsilon = 0) policy of a trained network.
pub struct GreedyPolicy<'a>(pub &'a QNetwork);

impl ObservationPolicy for GreedyPolicy<'_> {
    fn act(&mut self, observation: &Observation) -> Action {
        Action::ALL[argmax(&self.0.values(observation.as_slice()))]
    }
}

/// Greedy rollout of `net` in a fresh environment.
pub fn evaluate_greedy(net: &QNetwork, cfg: &EnvConfig) -> Result<Evaluation, DqnError> {
    let mut policy = GreedyPolicy(net);
    Ok(evaluate_policy(Controller::Observation(&mut policy), cfg)?)
}
