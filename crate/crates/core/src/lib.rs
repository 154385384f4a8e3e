//! Fractional-order phenotypic switching model of drug resistance with
//! optimal-control analysis, pulsing baselines and a Double DQN dosing agent.

pub mod baselines;
pub mod dqn;
pub mod env;
pub mod frac;
pub mod model;
pub mod pmp;
pub mod special;

pub use env::{episode_cost, Action, DoneReason, DosingEnv, EnvConfig, Observation, StepResult};
pub use model::{ModelParams, PopulationState, Trajectory};
