//! Pontryagin quantities of the resistant-fraction control problem and an
//! exhaustive piecewise-constant schedule search used to check that optimal
//! doses sit at the extremes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::episode_cost;
use crate::model::{simulate, ModelError, ModelParams, PopulationState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PmpError {
    #[error("{schedules} schedules exceed the enumeration limit of {limit}")]
    TooManySchedules { schedules: f64, limit: usize },
    #[error("invalid oracle setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Upper bound on enumerated schedules.
pub const MAX_SCHEDULES: usize = 10_000;

/// `H(phi, u, lambda) = lambda f(phi, u)`.
pub fn hamiltonian(p: &ModelParams, phi: f64, u: f64, lambda: f64) -> Result<f64, ModelError> {
    Ok(lambda * p.riccati_rhs(phi, u)?)
}

/// Coefficient of `g(u)` in the Hamiltonian:
/// `lambda [alpha_max - (dS + dR) phi^2 + (dS + dR + delta_max - alpha_max) phi]`
/// with `dS = kappa_S^max - kappa_S^min`, `dR = kappa_R^max - kappa_R^min`.
pub fn switching_coefficient(p: &ModelParams, phi: f64, lambda: f64) -> Result<f64, ModelError> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(ModelError::FractionOutOfRange(phi));
    }
    let spread = (p.kappa_s_max - p.kappa_s_min) + (p.kappa_r_max - p.kappa_r_min);
    Ok(lambda
        * (p.alpha_max - spread * phi * phi + (spread + p.delta_max - p.alpha_max) * phi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpliedAction {
    Pause,
    Treat,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchingEvaluation {
    pub fraction: f64,
    pub costate: f64,
    pub coefficient: f64,
    pub action: ImpliedAction,
}

/// Minimising `g(u) B` over `u`: treat when `B < 0`, pause when `B > 0`,
/// indeterminate within `1e-12 max(1, |lambda|)` of zero.
pub fn evaluate_switching(
    p: &ModelParams,
    phi: f64,
    lambda: f64,
) -> Result<SwitchingEvaluation, ModelError> {
    let b = switching_coefficient(p, phi, lambda)?;
    let tol = 1e-12 * lambda.abs().max(1.0);
    let action = if b.abs() <= tol {
        ImpliedAction::Indeterminate
    } else if b < 0.0 {
        ImpliedAction::Treat
    } else {
        ImpliedAction::Pause
    };
    Ok(SwitchingEvaluation {
        fraction: phi,
        costate: lambda,
        coefficient: b,
        action,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    /// Number of equal-length constant-dose intervals.
    pub intervals: usize,
    /// Admissible dose levels, each in [0, 1].
    pub levels: Vec<f64>,
    /// Horizon in hours.
    pub horizon: f64,
    /// Integration step in hours; must divide an interval evenly.
    pub step: f64,
    pub x0: PopulationState,
}

impl OracleSpec {
    pub fn new(intervals: usize, levels: Vec<f64>, horizon: f64) -> Self {
        Self {
            intervals,
            levels,
            horizon,
            step: 0.01,
            x0: PopulationState::new(1000.0, 0.0),
        }
    }

    fn steps_per_interval(&self) -> Result<usize, PmpError> {
        if self.intervals == 0 || self.levels.is_empty() {
            return Err(PmpError::InvalidSetup(
                "need at least one interval and one level".into(),
            ));
        }
        if self.levels.iter().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(PmpError::InvalidSetup(format!(
                "levels must lie in [0, 1]: {:?}",
                self.levels
            )));
        }
        let per = self.horizon / self.intervals as f64 / self.step;
        let rounded = per.round();
        if rounded < 1.0 || (per - rounded).abs() > 1e-6 {
            return Err(PmpError::InvalidSetup(format!(
                "interval length {} h is not a whole number of {} h steps",
                self.horizon / self.intervals as f64,
                self.step
            )));
        }
        Ok(rounded as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleCost {
    pub schedule: Vec<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best: ScheduleCost,
    /// Every schedule, in lexicographic order of level indices.
    pub table: Vec<ScheduleCost>,
}

impl OracleResult {
    /// Cheapest schedule using only the given levels.
    pub fn best_restricted(&self, allowed: &[f64]) -> Option<&ScheduleCost> {
        self.table
            .iter()
            .filter(|s| s.schedule.iter().all(|u| allowed.contains(u)))
            .fold(None, |best: Option<&ScheduleCost>, s| match best {
                Some(b) if b.cost <= s.cost => Some(b),
                _ => Some(s),
            })
    }

    /// `best cost over {0, 1} schedules - best cost overall`; zero when an
    /// extreme-valued schedule is optimal, positive when an interior dose wins.
    pub fn interior_advantage(&self) -> Option<f64> {
        self.best_restricted(&[0.0, 1.0])
            .map(|b| b.cost - self.best.cost)
    }
}

/// Simulates every piecewise-constant schedule over the interval grid under
/// `p` (including its memory order) and returns the cost-minimising one.
/// Ties go to the lexicographically smallest schedule.
pub fn bang_bang_oracle(p: &ModelParams, spec: &OracleSpec) -> Result<OracleResult, PmpError> {
    p.validate()?;
    let per = spec.steps_per_interval()?;
    let mut levels = spec.levels.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let count = (levels.len() as f64).powi(spec.intervals as i32);
    if count > MAX_SCHEDULES as f64 {
        return Err(PmpError::TooManySchedules {
            schedules: count,
            limit: MAX_SCHEDULES,
        });
    }
    let count = count as usize;
    let table = (0..count)
        .into_par_iter()
        .map(|code| {
            // Most significant digit first, so code order is lexicographic.
            let mut schedule = vec![0.0; spec.intervals];
            let mut rest = code;
            for slot in schedule.iter_mut().rev() {
                *slot = levels[rest % levels.len()];
                rest /= levels.len();
            }
            let per_step: Vec<f64> = schedule
                .iter()
                .flat_map(|&u| std::iter::repeat_n(u, per))
                .collect();
            let traj = simulate(p, spec.x0, spec.step, &per_step)?;
            Ok(ScheduleCost {
                schedule,
                cost: episode_cost(&traj),
            })
        })
        .collect::<Result<Vec<_>, PmpError>>()?;
    let best = table
        .iter()
        .fold(None, |best: Option<&ScheduleCost>, s| match best {
            Some(b) if b.cost <= s.cost => Some(b),
            _ => Some(s),
        })
        .expect("at least one schedule")
        .clone();
    Ok(OracleResult { best, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamiltonian_examples() {
        let p = ModelParams::default();
        assert_eq!(hamiltonian(&p, 0.3, 1.0, 0.0).unwrap(), 0.0);
        let r = p.effective_rates(0.4).unwrap();
        assert!((hamiltonian(&p, 0.0, 0.4, 2.5).unwrap() - 2.5 * r.alpha).abs() < 1e-15);
    }

    #[test]
    fn switching_coefficient_examples() {
        let p = ModelParams::default();
        assert!((switching_coefficient(&p, 0.0, 1.5).unwrap() - 1.5 * p.alpha_max).abs() < 1e-15);
        assert!((switching_coefficient(&p, 1.0, 1.5).unwrap() - 1.5 * p.delta_max).abs() < 1e-15);
        assert!((switching_coefficient(&p, 0.5, 1.0).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn implied_action_follows_sign() {
        let p = ModelParams::default();
        assert_eq!(
            evaluate_switching(&p, 0.5, 1.0).unwrap().action,
            ImpliedAction::Pause
        );
        assert_eq!(
            evaluate_switching(&p, 0.5, -1.0).unwrap().action,
            ImpliedAction::Treat
        );
        assert_eq!(
            evaluate_switching(&p, 0.5, 0.0).unwrap().action,
            ImpliedAction::Indeterminate
        );
    }

    #[test]
    fn oracle_guards_blowup_and_setup() {
        let p = ModelParams::default();
        let spec = OracleSpec::new(9, vec![0.0, 0.5, 1.0], 9.0);
        assert!(matches!(
            bang_bang_oracle(&p, &spec),
            Err(PmpError::TooManySchedules { .. })
        ));
        let spec = OracleSpec::new(3, vec![0.0, 1.0], 1.0);
        assert!(matches!(
            bang_bang_oracle(&p, &spec),
            Err(PmpError::InvalidSetup(_))
        ));
        let spec = OracleSpec::new(2, vec![0.0, 1.5], 1.0);
        assert!(bang_bang_oracle(&p, &spec).is_err());
    }

    #[test]
    fn single_interval_picks_cheaper_extreme() {
        let p = ModelParams::default();
        let r = bang_bang_oracle(&p, &OracleSpec::new(1, vec![0.0, 1.0], 1.0)).unwrap();
        assert_eq!(r.table.len(), 2);
        let (pause, treat) = (r.table[0].cost, r.table[1].cost);
        let expected = if pause <= treat { 0.0 } else { 1.0 };
        assert_eq!(r.best.schedule, vec![expected]);
    }
}
