//! Reference dosing controllers and the rollout/evaluation harness.
//!
//! Two controller families exist and are kept apart by type: [`FractionPolicy`]
//! implementations read the resistant fraction directly (privileged state),
//! [`ObservationPolicy`] implementations see only the growth-rate frames the
//! learning agent gets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{episode_cost, Action, DoneReason, DosingEnv, EnvConfig, EnvError, Observation};
use crate::model::Trajectory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("invalid thresholds: need 0 < low <= high < 1, got ({low}, {high})")]
    InvalidThresholds { low: f64, high: f64 },
    #[error("invalid sweep grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Controller with access to the resistant fraction.
pub trait FractionPolicy {
    fn act(&mut self, step: usize, fraction: f64) -> Action;

    /// Called before every rollout.
    fn reset(&mut self) {}
}

/// Controller restricted to the agent's observation.
pub trait ObservationPolicy {
    fn act(&mut self, observation: &Observation) -> Action;
}

pub enum Controller<'a> {
    Fraction(&'a mut dyn FractionPolicy),
    Observation(&'a mut dyn ObservationPolicy),
}

/// Always applies the same dose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantPolicy(pub Action);

pub fn constant_action(dose: Action) -> Action {
    dose
}

impl FractionPolicy for ConstantPolicy {
    fn act(&mut self, _step: usize, _fraction: f64) -> Action {
        constant_action(self.0)
    }
}

impl ObservationPolicy for ConstantPolicy {
    fn act(&mut self, _observation: &Observation) -> Action {
        constant_action(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Treatment,
    Pause,
}

/// Treat until the resistant fraction reaches `high`, pause until it falls to
/// `low`, repeat. Thresholds are checked once per grid step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsingPolicy {
    low: f64,
    high: f64,
    phase: Phase,
}

impl PulsingPolicy {
    pub fn new(low: f64, high: f64) -> Result<Self, BaselineError> {
        if !(low > 0.0 && low <= high && high < 1.0) {
            return Err(BaselineError::InvalidThresholds { low, high });
        }
        Ok(Self {
            low,
            high,
            phase: Phase::Treatment,
        })
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Returns the dose for the coming step, switching phase when the
    /// active threshold has been crossed.
    pub fn pulsing_action(&mut self, fraction: f64) -> Action {
        match self.phase {
            Phase::Treatment if fraction >= self.high => {
                self.phase = Phase::Pause;
                Action::Pause
            }
            Phase::Treatment => Action::Treat,
            Phase::Pause if fraction <= self.low => {
                self.phase = Phase::Treatment;
                Action::Treat
            }
            Phase::Pause => Action::Pause,
        }
    }
}

impl FractionPolicy for PulsingPolicy {
    fn act(&mut self, _step: usize, fraction: f64) -> Action {
        self.pulsing_action(fraction)
    }

    fn reset(&mut self) {
        self.phase = Phase::Treatment;
    }
}

/// Replays a fixed dose sequence; holds the last dose past its end.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenLoopPolicy {
    schedule: Vec<Action>,
}

impl OpenLoopPolicy {
    pub fn new(schedule: Vec<Action>) -> Self {
        Self { schedule }
    }

    pub fn schedule(&self) -> &[Action] {
        &self.schedule
    }
}

impl FractionPolicy for OpenLoopPolicy {
    fn act(&mut self, step: usize, _fraction: f64) -> Action {
        self.schedule
            .get(step)
            .or(self.schedule.last())
            .copied()
            .unwrap_or(Action::Treat)
    }
}

/// Number of dose changes between consecutive steps.
pub fn toggle_count(controls: &[f64]) -> usize {
    controls.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Dose changes per hour in windows of `window` steps advanced by `stride`
/// steps, reported at each window's midpoint time (hours).
///
/// A toggle is attributed to the step on which the new dose is applied; a
/// sequence alternating every step therefore saturates at `1 / delta`.
pub fn pulse_frequency(
    controls: &[f64],
    delta: f64,
    window: usize,
    stride: usize,
) -> Vec<(f64, f64)> {
    assert!(window > 0 && stride > 0, "window and stride must be positive");
    if controls.len() < window {
        return Vec::new();
    }
    let toggled: Vec<usize> = std::iter::once(0)
        .chain(controls.windows(2).map(|w| usize::from(w[0] != w[1])))
        .collect();
    let hours = window as f64 * delta;
    (0..=controls.len() - window)
        .step_by(stride)
        .map(|start| {
            let toggles: usize = toggled[start..start + window].iter().sum();
            let mid = (start as f64 + window as f64 / 2.0) * delta;
            (mid, toggles as f64 / hours)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub cost: f64,
    pub steps: usize,
    pub done: Option<DoneReason>,
    /// Time average of the resistant fraction over every grid point.
    pub mean_fraction: f64,
    pub toggles: usize,
    /// `(window midpoint in hours, toggles per hour)` over 1-hour windows.
    pub pulse_frequency: Vec<(f64, f64)>,
}

impl EpisodeSummary {
    pub fn from_trajectory(traj: &Trajectory, delta: f64, done: Option<DoneReason>) -> Self {
        let controls = traj.controls();
        let fractions = traj.fractions();
        let window = ((1.0 / delta).round() as usize).max(1);
        Self {
            cost: episode_cost(traj),
            steps: traj.steps(),
            done,
            mean_fraction: fractions.iter().sum::<f64>() / fractions.len() as f64,
            toggles: toggle_count(&controls),
            pulse_frequency: pulse_frequency(&controls, delta, window, window),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cost: f64,
    pub trajectory: Trajectory,
    pub summary: EpisodeSummary,
}

/// Runs one episode from reset, at most `max_steps` steps when given.
pub fn rollout(
    env: &mut DosingEnv,
    controller: Controller<'_>,
    max_steps: Option<usize>,
) -> Result<Evaluation, EnvError> {
    let mut observation = env.reset();
    let mut controller = controller;
    if let Controller::Fraction(p) = &mut controller {
        p.reset();
    }
    let limit = max_steps.unwrap_or(usize::MAX);
    while env.done().is_none() && env.steps() < limit {
        let action = match &mut controller {
            Controller::Fraction(p) => {
                let phi = env
                    .population()
                    .resistant_fraction()
                    .expect("population stays positive");
                p.act(env.steps(), phi)
            }
            Controller::Observation(p) => p.act(&observation),
        };
        observation = env.step(action)?.observation;
    }
    let trajectory = env.trajectory().clone();
    let summary = EpisodeSummary::from_trajectory(&trajectory, env.config().delta, env.done());
    Ok(Evaluation {
        cost: summary.cost,
        trajectory,
        summary,
    })
}

/// Full rollout of `controller` without learning.
pub fn evaluate_policy(controller: Controller<'_>, cfg: &EnvConfig) -> Result<Evaluation, EnvError> {
    let mut env = DosingEnv::new(*cfg)?;
    rollout(&mut env, controller, None)
}

/// Evaluates a fraction-threshold pulsing policy.
pub fn evaluate_pulsing(cfg: &EnvConfig, low: f64, high: f64) -> Result<Evaluation, BaselineError> {
    let mut policy = PulsingPolicy::new(low, high)?;
    Ok(evaluate_policy(Controller::Fraction(&mut policy), cfg)?)
}

/// Evaluates a constant dose.
pub fn evaluate_constant(cfg: &EnvConfig, dose: Action) -> Result<Evaluation, EnvError> {
    let mut policy = ConstantPolicy(dose);
    evaluate_policy(Controller::Fraction(&mut policy), cfg)
}

/// The dose sequence the thresholds produce in the memoryless system; this is
/// the memoryless protocol replayed open loop at other memory orders.
pub fn memoryless_schedule(
    cfg: &EnvConfig,
    low: f64,
    high: f64,
) -> Result<Vec<Action>, BaselineError> {
    let eval = evaluate_pulsing(&cfg.with_mu(1.0), low, high)?;
    Ok(eval
        .trajectory
        .controls()
        .into_iter()
        .map(|u| if u == 1.0 { Action::Treat } else { Action::Pause })
        .collect())
}

/// Threshold grid `lo, lo + step, ..., <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            lo: 0.1,
            hi: 0.9,
            step: 0.04,
        }
    }
}

impl SweepGrid {
    pub fn values(&self) -> Result<Vec<f64>, BaselineError> {
        if !(self.lo > 0.0 && self.hi < 1.0 && self.lo <= self.hi) {
            return Err(BaselineError::InvalidGrid(format!(
                "need 0 < lo <= hi < 1, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if !(self.step > 0.0) {
            return Err(BaselineError::InvalidGrid(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        // Rounded to 1e-12 so that e.g. 0.1 + 10 * 0.04 prints as 0.5.
        Ok((0..count)
            .map(|i| ((self.lo + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect())
    }

    /// Ordered pairs `(low, high)` with `low <= high`, low-major.
    pub fn pairs(&self) -> Result<Vec<(f64, f64)>, BaselineError> {
        let v = self.values()?;
        Ok(v.iter()
            .enumerate()
            .flat_map(|(i, &l)| v[i..].iter().map(move |&h| (l, h)))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub phi_l: f64,
    pub phi_h: f64,
    pub cost: f64,
}

impl SweepEntry {
    /// Lower cost wins; ties go to the narrower band, then the lower `phi_l`.
    fn beats(&self, other: &SweepEntry) -> bool {
        let key = |e: &SweepEntry| (e.cost, e.phi_h - e.phi_l, e.phi_l);
        let (a, b) = (key(self), key(other));
        a.partial_cmp(&b) == Some(std::cmp::Ordering::Less)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best: SweepEntry,
    pub table: Vec<SweepEntry>,
}

/// Exhaustive threshold sweep; each pair is one full evaluation under `cfg`.
/// Pairs run in parallel and are reduced in grid order.
pub fn sweep_thresholds(cfg: &EnvConfig, grid: &SweepGrid) -> Result<SweepResult, BaselineError> {
    let pairs = grid.pairs()?;
    let table = pairs
        .par_iter()
        .map(|&(l, h)| {
            evaluate_pulsing(cfg, l, h).map(|e| SweepEntry {
                phi_l: l,
                phi_h: h,
                cost: e.cost,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let best = table
        .iter()
        .copied()
        .reduce(|best, e| if e.beats(&best) { e } else { best })
        .expect("grid has at least one pair");
    Ok(SweepResult { best, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_actions() {
        let mut p = ConstantPolicy(Action::Treat);
        assert_eq!(FractionPolicy::act(&mut p, 7, 0.9), Action::Treat);
        let mut p = ConstantPolicy(Action::Pause);
        assert_eq!(FractionPolicy::act(&mut p, 0, 0.1), Action::Pause);
    }

    #[test]
    fn pulsing_switches_at_thresholds() {
        let mut p = PulsingPolicy::new(0.48, 0.52).unwrap();
        assert_eq!(p.pulsing_action(0.3), Action::Treat);
        assert_eq!(p.phase(), Phase::Treatment);
        assert_eq!(p.pulsing_action(0.53), Action::Pause);
        assert_eq!(p.phase(), Phase::Pause);
        assert_eq!(p.pulsing_action(0.5), Action::Pause);
        assert_eq!(p.pulsing_action(0.48), Action::Treat);
        assert_eq!(p.phase(), Phase::Treatment);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        assert!(PulsingPolicy::new(0.6, 0.5).is_err());
        assert!(PulsingPolicy::new(0.0, 0.5).is_err());
        assert!(PulsingPolicy::new(0.2, 1.0).is_err());
        assert!(PulsingPolicy::new(0.5, 0.5).is_ok());
    }

    #[test]
    fn grid_values_match_default_sweep() {
        let v = SweepGrid::default().values().unwrap();
        assert_eq!(v.len(), 21);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[10], 0.5);
        assert_eq!(v[20], 0.9);
        assert_eq!(SweepGrid::default().pairs().unwrap().len(), 21 * 22 / 2);
    }

    #[test]
    fn single_pair_grid() {
        let grid = SweepGrid {
            lo: 0.5,
            hi: 0.5,
            step: 0.04,
        };
        let mut cfg = EnvConfig::default();
        cfg.horizon = 200;
        let r = sweep_thresholds(&cfg, &grid).unwrap();
        assert_eq!(r.table.len(), 1);
        assert_eq!((r.best.phi_l, r.best.phi_h), (0.5, 0.5));
    }

    #[test]
    fn tie_break_prefers_narrow_then_low() {
        let a = SweepEntry {
            phi_l: 0.4,
            phi_h: 0.6,
            cost: -1.0,
        };
        let b = SweepEntry {
            phi_l: 0.5,
            phi_h: 0.5,
            cost: -1.0,
        };
        let c = SweepEntry {
            phi_l: 0.3,
            phi_h: 0.3,
            cost: -1.0,
        };
        assert!(b.beats(&a));
        assert!(c.beats(&b));
        assert!(!a.beats(&a));
    }

    #[test]
    fn pulse_frequency_constant_and_alternating() {
        let constant = vec![1.0; 300];
        assert!(pulse_frequency(&constant, 0.01, 100, 100)
            .iter()
            .all(|&(_, f)| f == 0.0));
        let alternating: Vec<f64> = (0..300).map(|i| (i % 2) as f64).collect();
        let f = pulse_frequency(&alternating, 0.01, 100, 100);
        assert_eq!(f.len(), 3);
        assert!((f[1].1 - 100.0).abs() < 1e-9);
        assert!((f[2].1 - 100.0).abs() < 1e-9);
        assert!((f[1].0 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_step_rollout_costs_nothing() {
        let mut env = DosingEnv::new(EnvConfig::default()).unwrap();
        let mut p = ConstantPolicy(Action::Treat);
        let e = rollout(&mut env, Controller::Fraction(&mut p), Some(0)).unwrap();
        assert_eq!(e.cost, 0.0);
        assert_eq!(e.trajectory.len(), 1);
    }

    #[test]
    fn open_loop_holds_last_dose() {
        let mut p = OpenLoopPolicy::new(vec![Action::Treat, Action::Pause]);
        assert_eq!(p.act(0, 0.0), Action::Treat);
        assert_eq!(p.act(1, 0.0), Action::Pause);
        assert_eq!(p.act(5, 0.0), Action::Pause);
    }
}
