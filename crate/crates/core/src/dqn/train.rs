//! Episode-driven training loop.
//!
//! Each episode is rolled out with epsilon-greedy actions. When it ends and
//! more than `learning_starts` environment steps have been taken, the agent
//! takes `episode length * gradient_steps_per_env_step` gradient steps. The
//! target network is refreshed every `target_update_interval` gradient steps.
//! A single ChaCha8 stream drives initialisation, exploration and replay
//! sampling, so a seed fixes the whole run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    act, double_q_targets, epsilon_at, gradient_step, Adam, Checkpoint, DqnConfig, DqnError,
    QNetwork, ReplayBuffer, Transition,
};
use crate::env::{episode_cost, DoneReason, DosingEnv, EnvConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Environment steps taken before this episode ended, over all episodes.
    pub env_steps: u64,
    pub gradient_steps: u64,
    pub length: usize,
    /// Sum of rewards.
    pub episode_return: f64,
    pub cost: f64,
    pub done: Option<DoneReason>,
    /// Exploration rate at the episode's last step.
    pub epsilon: f64,
    pub mean_loss: Option<f64>,
    pub max_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeRecord>,
}

impl TrainingLog {
    pub fn last(&self) -> Option<&EpisodeRecord> {
        self.episodes.last()
    }

    /// Column names of [`TrainingLog::csv_rows`].
    pub const CSV_HEADER: [&'static str; 10] = [
        "episode",
        "env_steps",
        "gradient_steps",
        "length",
        "return",
        "cost",
        "done",
        "epsilon",
        "mean_loss",
        "max_loss",
    ];

    pub fn csv_rows(&self) -> Vec<[String; 10]> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        self.episodes
            .iter()
            .map(|e| {
                [
                    e.episode.to_string(),
                    e.env_steps.to_string(),
                    e.gradient_steps.to_string(),
                    e.length.to_string(),
                    e.episode_return.to_string(),
                    e.cost.to_string(),
                    match e.done {
                        Some(DoneReason::Horizon) => "horizon".into(),
                        Some(DoneReason::PopulationExceeded) => "population_exceeded".into(),
                        None => "budget".into(),
                    },
                    e.epsilon.to_string(),
                    opt(e.mean_loss),
                    opt(e.max_loss),
                ]
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Trainer {
    pub(crate) cfg: DqnConfig,
    pub(crate) env_cfg: EnvConfig,
    pub(crate) env: DosingEnv,
    pub(crate) online: QNetwork,
    pub(crate) target: QNetwork,
    pub(crate) optimizer: Adam,
    pub(crate) replay: ReplayBuffer,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) env_steps: u64,
    pub(crate) gradient_steps: u64,
    pub(crate) log: TrainingLog,
}

impl Trainer {
    pub fn new(env_cfg: EnvConfig, cfg: DqnConfig) -> Result<Self, DqnError> {
        cfg.validate()?;
        let env = DosingEnv::new(env_cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let online = QNetwork::random(env_cfg.frames, &cfg, &mut rng);
        let target = online.clone();
        let optimizer = Adam::new(cfg.adam, online.mlp.params().len());
        Ok(Self {
            replay: ReplayBuffer::new(cfg.buffer_size),
            cfg,
            env_cfg,
            env,
            online,
            target,
            optimizer,
            rng,
            env_steps: 0,
            gradient_steps: 0,
            log: TrainingLog::default(),
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.cfg
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.env_cfg
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn gradient_steps(&self) -> u64 {
        self.gradient_steps
    }

    pub fn is_finished(&self) -> bool {
        self.env_steps >= self.cfg.total_steps
    }

    /// Rolls out one episode (cut short if the step budget runs out), then
    /// trains on the replay buffer.
    pub fn run_episode(&mut self) -> Result<&EpisodeRecord, DqnError> {
        let mut obs = self.env.reset();
        let mut epsilon = epsilon_at(self.env_steps, &self.cfg);
        let mut episode_return = 0.0;
        let mut length = 0usize;
        let mut done = None;
        while !self.is_finished() {
            epsilon = epsilon_at(self.env_steps, &self.cfg);
            let action = act(&self.online, obs.as_slice(), epsilon, &mut self.rng)?;
            let step = self.env.step(action)?;
            self.replay.push(Transition {
                observation: obs.into_vec(),
                action: action.index(),
                reward: step.reward,
                next_observation: step.observation.as_slice().to_vec(),
                done: step.is_terminal(),
            });
            episode_return += step.reward;
            length += 1;
            self.env_steps += 1;
            obs = step.observation;
            if step.done.is_some() {
                done = step.done;
                break;
            }
        }
        let cost = episode_cost(self.env.trajectory());

        let mut loss_sum = 0.0;
        let mut loss_max = f64::NEG_INFINITY;
        let mut updates = 0usize;
        if self.env_steps > self.cfg.learning_starts {
            for _ in 0..length * self.cfg.gradient_steps_per_env_step {
                let loss = self.train_step()?;
                loss_sum += loss;
                loss_max = loss_max.max(loss);
                updates += 1;
            }
        }
        self.log.episodes.push(EpisodeRecord {
            episode: self.log.episodes.len() as u64,
            env_steps: self.env_steps,
            gradient_steps: self.gradient_steps,
            length,
            episode_return,
            cost,
            done,
            epsilon,
            mean_loss: (updates > 0).then(|| loss_sum / updates as f64),
            max_loss: (updates > 0).then_some(loss_max),
        });
        Ok(self.log.episodes.last().expect("just pushed"))
    }

    /// One sampled minibatch update, followed by a target refresh when the
    /// gradient step count reaches a multiple of the update interval.
    pub fn train_step(&mut self) -> Result<f64, DqnError> {
        let batch = self.replay.sample(&mut self.rng, self.cfg.batch_size);
        let targets = double_q_targets(&batch, &self.online, &self.target, self.cfg.gamma);
        let loss = gradient_step(
            &mut self.online,
            &batch,
            &targets,
            &mut self.optimizer,
            self.cfg.learning_rate,
        )?;
        self.gradient_steps += 1;
        if self.gradient_steps.is_multiple_of(self.cfg.target_update_interval) {
            self.update_target();
        }
        Ok(loss)
    }

    fn update_target(&mut self) {
        let tau = self.cfg.polyak_tau;
        if tau >= 1.0 {
            self.target.mlp.params_mut().copy_from_slice(self.online.mlp.params());
            return;
        }
        for (t, o) in self
            .target
            .mlp
            .params_mut()
            .iter_mut()
            .zip(self.online.mlp.params())
        {
            *t = (1.0 - tau) * *t + tau * o;
        }
    }

    /// Runs episodes until the step budget is spent.
    pub fn train(&mut self) -> Result<(), DqnError> {
        while !self.is_finished() {
            self.run_episode()?;
        }
        Ok(())
    }

    /// Runs episodes until at least `env_steps` steps have been taken or the
    /// budget is spent. Stops only at episode boundaries.
    pub fn train_until(&mut self, env_steps: u64) -> Result<(), DqnError> {
        while !self.is_finished() && self.env_steps < env_steps {
            self.run_episode()?;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(self)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self, DqnError> {
        ckpt.restore()
    }

    pub fn into_parts(self) -> (QNetwork, TrainingLog) {
        (self.online, self.log)
    }
}

/// Trains from scratch for `cfg.total_steps` environment steps.
pub fn train_agent(env_cfg: &EnvConfig, cfg: &DqnConfig) -> Result<(QNetwork, TrainingLog), DqnError> {
    let mut trainer = Trainer::new(*env_cfg, cfg.clone())?;
    trainer.train()?;
    Ok(trainer.into_parts())
}
