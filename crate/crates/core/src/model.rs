//! Phenotypic switching model: dose-dependent rates, the state-transition
//! matrix and the reduced resistant-fraction dynamics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frac::{FracSolver, SolverError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("control must lie in [0, 1], got {0}")]
    ControlOutOfRange(f64),
    #[error("resistant fraction must lie in [0, 1], got {0}")]
    FractionOutOfRange(f64),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Monotone dose-response map `g: [0, 1] -> [0, 1]` with `g(0) = 0`, `g(1) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DoseResponse {
    /// `g(u) = u`
    Linear,
    /// `g(u) = u^exponent`, `exponent > 0`
    Power { exponent: f64 },
    /// Hill curve rescaled to pass through (0, 0) and (1, 1):
    /// `g(u) = u^n (1 + k^n) / (u^n + k^n)`.
    Hill { coefficient: f64, half_effect: f64 },
}

impl DoseResponse {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            DoseResponse::Linear => u,
            DoseResponse::Power { exponent } => u.powf(exponent),
            DoseResponse::Hill {
                coefficient,
                half_effect,
            } => {
                let un = u.powf(coefficient);
                let kn = half_effect.powf(coefficient);
                un * (1.0 + kn) / (un + kn)
            }
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: &str| ModelError::InvalidParameter {
            name: "dose_response",
            reason: reason.to_string(),
        };
        match *self {
            DoseResponse::Linear => Ok(()),
            DoseResponse::Power { exponent } if exponent > 0.0 && exponent.is_finite() => Ok(()),
            DoseResponse::Power { .. } => Err(bad("power exponent must be positive")),
            DoseResponse::Hill {
                coefficient,
                half_effect,
            } if coefficient > 0.0 && half_effect > 0.0 => Ok(()),
            DoseResponse::Hill { .. } => Err(bad("hill coefficient and half effect must be positive")),
        }
    }
}

/// Rate constants (per hour), memory order and dose response.
///
/// Serialized as a flat JSON object; every field is required.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Susceptible net growth without drug (> 0).
    pub kappa_s_max: f64,
    /// Susceptible net growth at full dose (< 0).
    pub kappa_s_min: f64,
    /// Resistant net growth at full dose (> 0).
    pub kappa_r_max: f64,
    /// Resistant net growth without drug (< 0).
    pub kappa_r_min: f64,
    /// Susceptible-to-resistant switching at full dose (> 0).
    pub alpha_max: f64,
    /// Resistant-to-susceptible switching without drug (> 0).
    pub delta_max: f64,
    /// Memory order in (0, 1]; 1 is memoryless.
    pub mu: f64,
    pub dose_response: DoseResponse,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            kappa_s_max: 0.08,
            kappa_s_min: -0.12,
            kappa_r_max: 0.08,
            kappa_r_min: -0.12,
            alpha_max: 0.3,
            delta_max: 0.3,
            mu: 1.0,
            dose_response: DoseResponse::Linear,
        }
    }
}

/// Effective rates at a given dose, per hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub kappa_s: f64,
    pub kappa_r: f64,
    pub alpha: f64,
    pub delta: f64,
}

pub type Matrix2 = [[f64; 2]; 2];

fn check_control(u: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(ModelError::ControlOutOfRange(u))
    }
}

fn check_fraction(phi: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&phi) {
        Ok(())
    } else {
        Err(ModelError::FractionOutOfRange(phi))
    }
}

impl ModelParams {
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let sign = |name: &'static str, v: f64, positive: bool| {
            let ok = v.is_finite() && if positive { v > 0.0 } else { v < 0.0 };
            if ok {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter {
                    name,
                    reason: format!(
                        "must be {} (got {v})",
                        if positive { "positive" } else { "negative" }
                    ),
                })
            }
        };
        sign("kappa_s_max", self.kappa_s_max, true)?;
        sign("kappa_s_min", self.kappa_s_min, false)?;
        sign("kappa_r_max", self.kappa_r_max, true)?;
        sign("kappa_r_min", self.kappa_r_min, false)?;
        sign("alpha_max", self.alpha_max, true)?;
        sign("delta_max", self.delta_max, true)?;
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "mu",
                reason: format!("must lie in (0, 1] (got {})", self.mu),
            });
        }
        self.dose_response.validate()
    }

    /// Rates at dose `u`: susceptible growth falls and resistant growth rises
    /// with `g(u)`; switching to resistance scales with `g(u)`, switching back
    /// with `1 - g(u)`.
    pub fn effective_rates(&self, u: f64) -> Result<Rates, ModelError> {
        check_control(u)?;
        Ok(self.rates_unchecked(u))
    }

    fn rates_unchecked(&self, u: f64) -> Rates {
        let g = self.dose_response.eval(u);
        Rates {
            // Convex-combination form; equal to kS_max - (kS_max - kS_min) g but
            // exact at both endpoints.
            kappa_s: self.kappa_s_max * (1.0 - g) + self.kappa_s_min * g,
            kappa_r: self.kappa_r_min * (1.0 - g) + self.kappa_r_max * g,
            alpha: self.alpha_max * g,
            delta: self.delta_max * (1.0 - g),
        }
    }

    /// `A(u) = [[kappa_S - alpha, delta], [alpha, kappa_R - delta]]`
    pub fn transition_matrix(&self, u: f64) -> Result<Matrix2, ModelError> {
        check_control(u)?;
        Ok(self.matrix_unchecked(u))
    }

    fn matrix_unchecked(&self, u: f64) -> Matrix2 {
        let r = self.rates_unchecked(u);
        [
            [r.kappa_s - r.alpha, r.delta],
            [r.alpha, r.kappa_r - r.delta],
        ]
    }

    /// Full-dose matrix `A(1)`.
    pub fn treatment_matrix(&self) -> Matrix2 {
        self.matrix_unchecked(1.0)
    }

    /// Drug-free matrix `A(0)`.
    pub fn pause_matrix(&self) -> Matrix2 {
        self.matrix_unchecked(0.0)
    }

    /// Right-hand side of the resistant-fraction equation
    /// `(kS - kR) phi^2 + (kR - kS - delta - alpha) phi + alpha`.
    pub fn riccati_rhs(&self, phi: f64, u: f64) -> Result<f64, ModelError> {
        check_fraction(phi)?;
        let r = self.effective_rates(u)?;
        Ok((r.kappa_s - r.kappa_r) * phi * phi
            + (r.kappa_r - r.kappa_s - r.delta - r.alpha) * phi
            + r.alpha)
    }

    /// Population-weighted net growth `kS (1 - phi) + kR phi`.
    pub fn instantaneous_growth(&self, phi: f64, u: f64) -> Result<f64, ModelError> {
        check_fraction(phi)?;
        let r = self.effective_rates(u)?;
        Ok(r.kappa_s * (1.0 - phi) + r.kappa_r * phi)
    }

    /// The linear vector field `x -> A(u) x` of the two-compartment system.
    /// `u` is clamped to [0, 1]; callers validate controls up front.
    pub fn vector_field(&self) -> impl Fn(&[f64; 2], f64) -> [f64; 2] + '_ {
        let treat = self.treatment_matrix();
        let pause = self.pause_matrix();
        move |x, u| {
            let a = if u == 1.0 {
                treat
            } else if u == 0.0 {
                pause
            } else {
                self.matrix_unchecked(u.clamp(0.0, 1.0))
            };
            mat_vec(&a, x)
        }
    }
}

pub fn mat_vec(a: &Matrix2, x: &[f64; 2]) -> [f64; 2] {
    [
        a[0][0] * x[0] + a[0][1] * x[1],
        a[1][0] * x[0] + a[1][1] * x[1],
    ]
}

/// Susceptible and resistant cell counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationState {
    pub susceptible: f64,
    pub resistant: f64,
}

impl PopulationState {
    pub fn new(susceptible: f64, resistant: f64) -> Self {
        Self {
            susceptible,
            resistant,
        }
    }

    pub fn from_array(x: [f64; 2]) -> Self {
        Self::new(x[0], x[1])
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.susceptible, self.resistant]
    }

    pub fn total(&self) -> f64 {
        self.susceptible + self.resistant
    }

    /// `R / N`, undefined for an empty population.
    pub fn resistant_fraction(&self) -> Option<f64> {
        let n = self.total();
        (n > 0.0).then(|| self.resistant / n)
    }
}

/// One grid point of a rollout.
///
/// `control` and `growth` describe the step that *ended* at `time`; they are
/// `None` on the initial row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub state: PopulationState,
    pub control: Option<f64>,
    /// `log(N_t / N_{t-h}) / h`, per hour.
    pub growth: Option<f64>,
}

impl TrajectoryPoint {
    pub fn fraction(&self) -> f64 {
        self.state.resistant_fraction().unwrap_or(f64::NAN)
    }

    pub fn reward(&self) -> Option<f64> {
        self.growth.map(|c| -c)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn start(state: PopulationState) -> Self {
        Self {
            points: vec![TrajectoryPoint {
                time: 0.0,
                state,
                control: None,
                growth: None,
            }],
        }
    }

    /// Appends the state reached after holding `control` for `step` hours.
    pub fn push_step(&mut self, step: f64, control: f64, state: PopulationState) {
        let last = *self.points.last().expect("trajectory has an initial point");
        let growth = (state.total() / last.state.total()).ln() / step;
        self.points.push(TrajectoryPoint {
            time: self.points.len() as f64 * step,
            state,
            control: Some(control),
            growth: Some(growth),
        });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of steps taken (points minus the initial one).
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn controls(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.control).collect()
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.points.iter().map(TrajectoryPoint::fraction).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.state.total()).collect()
    }

    pub fn first(&self) -> &TrajectoryPoint {
        &self.points[0]
    }

    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory is never empty")
    }
}

/// Simulates the two-compartment system under a per-step dose schedule.
pub fn simulate(
    params: &ModelParams,
    x0: PopulationState,
    step: f64,
    schedule: &[f64],
) -> Result<Trajectory, ModelError> {
    params.validate()?;
    for &u in schedule {
        check_control(u)?;
    }
    let mut solver = FracSolver::new(step, params.mu, x0.to_array())?;
    solver.reserve(schedule.len());
    let rhs = params.vector_field();
    let mut traj = Trajectory::start(x0);
    traj.points.reserve(schedule.len());
    for &u in schedule {
        let x = solver.step(&rhs, u)?;
        traj.push_step(step, u, PopulationState::from_array(x));
    }
    Ok(traj)
}
