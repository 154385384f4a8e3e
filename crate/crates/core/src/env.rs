//! Episodic dosing environment.
//!
//! Each action holds a binary dose for `delta` hours of fractional dynamics.
//! The agent observes only the last `frames` growth-rate estimates
//! `c_t = log(N_t / N_{t-delta}) / delta` and is rewarded with `-c_t`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frac::{FracSolver, SolverError};
use crate::model::{mat_vec, Matrix2, ModelError, ModelParams, PopulationState, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("episode already finished ({0:?}); call reset")]
    EpisodeFinished(DoneReason),
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("action index {0} is not a valid dose (expected 0 or 1)")]
    InvalidAction(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Binary dose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Pause,
    Treat,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Pause, Action::Treat];

    pub fn index(self) -> usize {
        match self {
            Action::Pause => 0,
            Action::Treat => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self, EnvError> {
        match i {
            0 => Ok(Action::Pause),
            1 => Ok(Action::Treat),
            other => Err(EnvError::InvalidAction(other)),
        }
    }

    pub fn dose(self) -> f64 {
        self.index() as f64
    }
}

fn default_delta() -> f64 {
    0.01
}
fn default_frames() -> usize {
    5
}
fn default_x0() -> PopulationState {
    PopulationState::new(1000.0, 0.0)
}
fn default_horizon() -> usize {
    10_000
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// Hours per action.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Growth-rate estimates stacked into one observation.
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_x0")]
    pub x0: PopulationState,
    /// Episode length in steps.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// End the episode as soon as `N_t > N_0`.
    #[serde(default = "default_true")]
    pub terminate_on_growth: bool,
    pub params: ModelParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            frames: default_frames(),
            x0: default_x0(),
            horizon: default_horizon(),
            terminate_on_growth: true,
            params: ModelParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.params.mu = mu;
        self
    }

    /// Keeps the simulated duration `horizon * delta` fixed while changing `delta`.
    pub fn with_delta(mut self, delta: f64) -> Self {
        let hours = self.horizon as f64 * self.delta;
        self.delta = delta;
        self.horizon = ((hours / delta).round() as usize).max(1);
        self
    }

    pub fn duration(&self) -> f64 {
        self.horizon as f64 * self.delta
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(EnvError::InvalidConfig(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.frames == 0 {
            return Err(EnvError::InvalidConfig("frames must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(EnvError::InvalidConfig("horizon must be at least 1".into()));
        }
        let x0 = self.x0;
        if !(x0.susceptible >= 0.0 && x0.resistant >= 0.0 && x0.total() > 0.0) {
            return Err(EnvError::InvalidConfig(format!(
                "initial population must be nonnegative with positive total, got {x0:?}"
            )));
        }
        self.params.validate()?;
        Ok(())
    }
}

/// The last `K` growth-rate estimates, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn newest(&self) -> f64 {
        *self.0.last().expect("observation has at least one frame")
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Observation {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    Horizon,
    PopulationExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    /// `-c_t`, per hour.
    pub reward: f64,
    pub done: Option<DoneReason>,
}

impl StepResult {
    pub fn is_done(&self) -> bool {
        self.done.is_some()
    }

    /// True only for the population rule; hitting the horizon is a truncation.
    pub fn is_terminal(&self) -> bool {
        self.done == Some(DoneReason::PopulationExceeded)
    }
}

#[derive(Debug, Clone)]
pub struct DosingEnv {
    cfg: EnvConfig,
    treat: Matrix2,
    pause: Matrix2,
    solver: FracSolver<2>,
    frames: VecDeque<f64>,
    initial_total: f64,
    state: PopulationState,
    steps: usize,
    done: Option<DoneReason>,
    trajectory: Trajectory,
}

impl DosingEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let mut solver = FracSolver::new(cfg.delta, cfg.params.mu, cfg.x0.to_array())?;
        solver.reserve(cfg.horizon);
        let mut env = Self {
            treat: cfg.params.treatment_matrix(),
            pause: cfg.params.pause_matrix(),
            solver,
            frames: VecDeque::with_capacity(cfg.frames),
            initial_total: cfg.x0.total(),
            state: cfg.x0,
            steps: 0,
            done: None,
            trajectory: Trajectory::default(),
            cfg,
        };
        env.reset();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Clears the solver history and returns the all-zero observation.
    pub fn reset(&mut self) -> Observation {
        self.solver.reset(self.cfg.x0.to_array());
        self.frames.clear();
        self.frames.extend(std::iter::repeat_n(0.0, self.cfg.frames));
        self.state = self.cfg.x0;
        self.initial_total = self.cfg.x0.total();
        self.steps = 0;
        self.done = None;
        self.trajectory = Trajectory::start(self.cfg.x0);
        self.trajectory.points.reserve(self.cfg.horizon);
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        Observation(self.frames.iter().copied().collect())
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        if let Some(reason) = self.done {
            return Err(EnvError::EpisodeFinished(reason));
        }
        let a = match action {
            Action::Treat => self.treat,
            Action::Pause => self.pause,
        };
        let x = self.solver.step(|x, _| mat_vec(&a, x), action.dose())?;
        let next = PopulationState::from_array(x);
        let prev_total = self.state.total();
        assert!(
            next.total() > 0.0,
            "population vanished or turned negative at step {}: {next:?}",
            self.steps + 1
        );
        let growth = (next.total() / prev_total).ln() / self.cfg.delta;
        self.state = next;
        self.steps += 1;
        self.trajectory
            .push_step(self.cfg.delta, action.dose(), next);

        self.frames.pop_front();
        self.frames.push_back(growth);

        self.done = if self.cfg.terminate_on_growth && next.total() > self.initial_total {
            Some(DoneReason::PopulationExceeded)
        } else if self.steps >= self.cfg.horizon {
            Some(DoneReason::Horizon)
        } else {
            None
        };
        Ok(StepResult {
            observation: self.observation(),
            reward: -growth,
            done: self.done,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.cfg.delta
    }

    pub fn done(&self) -> Option<DoneReason> {
        self.done
    }

    /// Current subpopulation sizes. Available to baselines that use the
    /// resistant fraction; the learning agent only ever sees observations.
    pub fn population(&self) -> PopulationState {
        self.state
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }
}

/// `log(N_T / N_0)` of a rollout.
///
/// # Panics
///
/// If either end of the trajectory has a nonpositive population, which the
/// model cannot produce.
pub fn episode_cost(traj: &Trajectory) -> f64 {
    let n0 = traj.first().state.total();
    let nt = traj.last().state.total();
    assert!(
        n0 > 0.0 && nt > 0.0,
        "episode cost undefined: N(0) = {n0}, N(T) = {nt}"
    );
    (nt / n0).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_returns_zero_padding() {
        let mut env = DosingEnv::new(EnvConfig::default()).unwrap();
        assert_eq!(env.reset().as_slice(), &[0.0; 5]);
        let mut cfg = EnvConfig::default();
        cfg.frames = 1;
        let mut env = DosingEnv::new(cfg).unwrap();
        assert_eq!(env.reset().as_slice(), &[0.0]);
    }

    #[test]
    fn pause_from_susceptible_start_terminates_immediately() {
        let mut env = DosingEnv::new(EnvConfig::default()).unwrap();
        let r = env.step(Action::Pause).unwrap();
        assert_eq!(r.done, Some(DoneReason::PopulationExceeded));
        assert!(env.population().total() > 1000.0);
        assert!(matches!(
            env.step(Action::Treat),
            Err(EnvError::EpisodeFinished(DoneReason::PopulationExceeded))
        ));
    }

    #[test]
    fn horizon_ends_episode() {
        let mut cfg = EnvConfig::default();
        cfg.horizon = 3;
        let mut env = DosingEnv::new(cfg).unwrap();
        assert!(!env.step(Action::Treat).unwrap().is_done());
        assert!(!env.step(Action::Treat).unwrap().is_done());
        let last = env.step(Action::Treat).unwrap();
        assert_eq!(last.done, Some(DoneReason::Horizon));
        assert!(!last.is_terminal());
    }

    #[test]
    fn frames_shift_left() {
        let mut env = DosingEnv::new(EnvConfig::default()).unwrap();
        let mut prev = env.reset();
        for _ in 0..8 {
            let r = env.step(Action::Treat).unwrap();
            let o = r.observation.as_slice();
            assert_eq!(&o[..4], &prev.as_slice()[1..]);
            assert_eq!(o[4], -r.reward);
            prev = r.observation;
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = EnvConfig::default();
        cfg.frames = 0;
        assert!(DosingEnv::new(cfg).is_err());
        let mut cfg = EnvConfig::default();
        cfg.x0 = PopulationState::new(0.0, 0.0);
        assert!(DosingEnv::new(cfg).is_err());
        let mut cfg = EnvConfig::default();
        cfg.delta = -1.0;
        assert!(DosingEnv::new(cfg).is_err());
        assert!(Action::from_index(2).is_err());
    }

    #[test]
    fn with_delta_keeps_duration() {
        let cfg = EnvConfig::default().with_delta(0.1);
        assert_eq!(cfg.horizon, 1000);
        assert!((cfg.duration() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn cost_of_constant_and_doubled_population() {
        let mut t = Trajectory::start(PopulationState::new(10.0, 0.0));
        t.push_step(1.0, 0.0, PopulationState::new(10.0, 0.0));
        assert_eq!(episode_cost(&t), 0.0);
        t.push_step(1.0, 0.0, PopulationState::new(12.0, 8.0));
        assert!((episode_cost(&t) - 2f64.ln()).abs() < 1e-15);
    }
}
