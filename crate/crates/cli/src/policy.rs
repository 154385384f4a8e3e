use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use fracdose::baselines::{
    evaluate_constant, evaluate_policy, evaluate_pulsing, memoryless_schedule, Controller, Evaluation,
    OpenLoopPolicy,
};
use fracdose::dqn::{evaluate_greedy, Checkpoint};
use fracdose::{Action, EnvConfig};

/// A policy named on the command line.
///
/// * `constant:0`, `constant:1`: hold one dose.
/// * `pulsing:LOW,HIGH`: resistant-fraction thresholds, closed loop.
/// * `memoryless:LOW,HIGH`: the dose sequence the thresholds produce at
///   memory order 1, replayed open loop.
/// * `greedy:PATH`: greedy policy of a training checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Constant(Action),
    Pulsing { low: f64, high: f64 },
    Memoryless { low: f64, high: f64 },
    Greedy(PathBuf),
}

fn thresholds(arg: &str) -> Result<(f64, f64)> {
    let (l, h) = arg
        .split_once(',')
        .ok_or_else(|| anyhow!("expected LOW,HIGH, got {arg:?}"))?;
    Ok((l.trim().parse()?, h.trim().parse()?))
}

impl FromStr for PolicySpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let spec = match name {
            "constant" => match arg {
                "0" => PolicySpec::Constant(Action::Pause),
                "1" => PolicySpec::Constant(Action::Treat),
                _ => bail!("constant dose must be 0 or 1, got {arg:?}"),
            },
            "pulsing" => {
                let (low, high) = thresholds(arg).with_context(|| format!("policy {s:?}"))?;
                PolicySpec::Pulsing { low, high }
            }
            "memoryless" => {
                let (low, high) = thresholds(arg).with_context(|| format!("policy {s:?}"))?;
                PolicySpec::Memoryless { low, high }
            }
            "greedy" if !arg.is_empty() => PolicySpec::Greedy(arg.into()),
            _ => bail!("unknown policy {s:?}; expected constant:U, pulsing:L,H, memoryless:L,H or greedy:PATH"),
        };
        Ok(spec)
    }
}

impl PolicySpec {
    /// Short name used in file names and report tables.
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Constant(a) => format!("constant-{}", a.dose()),
            PolicySpec::Pulsing { low, high } => format!("pulsing-{low}-{high}"),
            PolicySpec::Memoryless { low, high } => format!("memoryless-{low}-{high}"),
            PolicySpec::Greedy(_) => "dqn".into(),
        }
    }

    pub fn evaluate(&self, cfg: &EnvConfig) -> Result<Evaluation> {
        Ok(match self {
            PolicySpec::Constant(a) => evaluate_constant(cfg, *a)?,
            PolicySpec::Pulsing { low, high } => evaluate_pulsing(cfg, *low, *high)?,
            PolicySpec::Memoryless { low, high } => {
                let mut replay = OpenLoopPolicy::new(memoryless_schedule(cfg, *low, *high)?);
                evaluate_policy(Controller::Fraction(&mut replay), cfg)?
            }
            PolicySpec::Greedy(path) => {
                let net = Checkpoint::load(path)
                    .with_context(|| format!("loading {}", path.display()))?
                    .network()?;
                if net.inputs() != cfg.frames {
                    bail!(
                        "{} expects {} frames but the config has {}",
                        path.display(),
                        net.inputs(),
                        cfg.frames
                    );
                }
                evaluate_greedy(&net, cfg)?
            }
        })
    }
}
