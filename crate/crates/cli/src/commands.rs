use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fracdose::baselines::sweep_thresholds;
use fracdose::dqn::{evaluate_greedy, Checkpoint, DqnConfig, Trainer, TrainingLog};
use fracdose::EnvConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::io::{write_csv, write_trajectory};
use crate::manifest::{OutputFile, OutputKind, RunManifest};
use crate::policy::PolicySpec;

/// Flags shared by every command that produces artifacts.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mu: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Overrides {
    /// Loads the config and applies a single `--mu` and `--delta`.
    pub fn resolve(&self) -> Result<RunConfig> {
        if self.mu.len() > 1 {
            bail!("this command takes at most one --mu");
        }
        if self.delta.len() > 1 {
            bail!("this command takes at most one --delta");
        }
        let mut cfg = self.base()?;
        if let Some(&mu) = self.mu.first() {
            cfg.set_mu(mu);
        }
        if let Some(&delta) = self.delta.first() {
            cfg.set_delta(delta);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn base(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.dqn.seed = seed;
        }
        Ok(cfg)
    }
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn trajectory_output(path: String, policy: &str, env: &EnvConfig, cost: f64) -> OutputFile {
    OutputFile {
        policy: Some(policy.into()),
        mu: Some(env.params.mu),
        delta: Some(env.delta),
        cost: Some(cost),
        ..OutputFile::new(path, OutputKind::Trajectory)
    }
}

/// One rollout per (policy, memory order) pair.
pub fn simulate(ov: &Overrides, policies: &[PolicySpec], out: &Path) -> Result<()> {
    if policies.is_empty() {
        bail!("at least one --policy is required");
    }
    let mut labels = BTreeSet::new();
    for p in policies {
        if !labels.insert(p.label()) {
            bail!("policy {} given twice", p.label());
        }
    }
    let mut cfg = Overrides {
        mu: Vec::new(),
        ..ov.clone()
    }
    .resolve()?;
    let orders = if ov.mu.is_empty() { vec![cfg.model.mu] } else { ov.mu.clone() };
    if orders.len() == 1 {
        cfg.set_mu(orders[0]);
    }
    cfg.validate()?;
    prepare(out)?;
    let mut manifest = RunManifest::begin("simulate", &cfg);
    let mut summary = Vec::new();
    for &mu in &orders {
        let mut run = cfg.clone();
        run.set_mu(mu);
        run.validate()?;
        let env = run.env_config();
        for p in policies {
            let eval = p.evaluate(&env)?;
            let name = format!("traj_{}_mu{mu}.csv", p.label());
            write_trajectory(&out.join(&name), &eval.trajectory)?;
            let s = &eval.summary;
            summary.push([
                p.label(),
                mu.to_string(),
                eval.cost.to_string(),
                s.steps.to_string(),
                s.mean_fraction.to_string(),
                s.toggles.to_string(),
                name.clone(),
            ]);
            manifest.outputs.push(trajectory_output(name, &p.label(), &env, eval.cost));
        }
    }
    write_csv(
        &out.join("summary.csv"),
        &["policy", "mu", "cost", "steps", "mean_phi", "toggles", "file"],
        summary,
    )?;
    manifest.outputs.push(OutputFile::new("summary.csv", OutputKind::Summary));
    manifest.finish(out)
}

pub fn sweep(ov: &Overrides, out: &Path) -> Result<()> {
    let cfg = ov.resolve()?;
    prepare(out)?;
    let mut manifest = RunManifest::begin("sweep-thresholds", &cfg);
    let result = sweep_thresholds(&cfg.env_config(), &cfg.sweep)?;
    let row = |e: &fracdose::baselines::SweepEntry| [e.phi_l.to_string(), e.phi_h.to_string(), e.cost.to_string()];
    let header = ["phi_l", "phi_h", "cost"];
    write_csv(&out.join("sweep.csv"), &header, result.table.iter().map(row))?;
    write_csv(&out.join("sweep_best.csv"), &header, [row(&result.best)])?;
    let tagged = |path: &str, kind| OutputFile {
        mu: Some(cfg.model.mu),
        delta: Some(cfg.env.delta),
        ..OutputFile::new(path, kind)
    };
    manifest.outputs.push(tagged("sweep.csv", OutputKind::Sweep));
    manifest.outputs.push(tagged("sweep_best.csv", OutputKind::SweepBest));
    manifest.finish(out)
}

fn write_log(path: &Path, log: &TrainingLog) -> Result<()> {
    write_csv(path, &TrainingLog::CSV_HEADER, log.csv_rows())
}

/// Trains one agent, or continues the run stored in `resume`.
pub fn train(ov: &Overrides, resume: Option<&Path>, out: &Path) -> Result<()> {
    let (cfg, mut trainer) = match resume {
        Some(path) => {
            if !ov.mu.is_empty() || !ov.delta.is_empty() || ov.seed.is_some() {
                bail!("--resume continues the stored run; --mu, --delta and --seed do not apply");
            }
            let cfg = ov.resolve()?;
            let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            let trainer = ckpt.restore()?;
            let mut cfg = cfg;
            cfg.dqn = trainer.config().clone();
            let env = *trainer.env_config();
            cfg.model = env.params;
            cfg.env.delta = env.delta;
            cfg.env.frames = env.frames;
            cfg.env.x0 = env.x0;
            cfg.env.horizon = env.horizon;
            cfg.env.terminate_on_growth = env.terminate_on_growth;
            (cfg, trainer)
        }
        None => {
            let cfg = ov.resolve()?;
            let trainer = Trainer::new(cfg.env_config(), cfg.dqn.clone())?;
            (cfg, trainer)
        }
    };
    prepare(out)?;
    let mut manifest = RunManifest::begin("train", &cfg);
    if let Some(path) = resume {
        manifest.notes.push(format!("resumed from {}", path.display()));
    }
    trainer.train()?;
    trainer.checkpoint().save(&out.join("checkpoint.json"))?;
    write_log(&out.join("training_log.csv"), trainer.log())?;
    let env = cfg.env_config();
    let eval = evaluate_greedy(trainer.online(), &env)?;
    write_trajectory(&out.join("greedy_trajectory.csv"), &eval.trajectory)?;
    manifest.outputs.push(OutputFile::new("checkpoint.json", OutputKind::Checkpoint));
    manifest.outputs.push(OutputFile::new("training_log.csv", OutputKind::TrainingLog));
    manifest
        .outputs
        .push(trajectory_output("greedy_trajectory.csv".into(), "dqn", &env, eval.cost));
    manifest.finish(out)
}

/// Hyperparameters drawn for one delta-sweep run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub batch_size: usize,
    pub epsilon_floor: f64,
    pub learning_rate: f64,
    pub target_update_interval: u64,
}

/// Batch from {16, 32, 64}, exploration floor uniform on [0.01, 0.2],
/// learning rate log-uniform on [1e-5, 1e-3], target interval from
/// {1000, 5000, 10000, 30000}.
pub fn draw_hyperparameters<R: Rng>(rng: &mut R) -> Draw {
    Draw {
        batch_size: *[16, 32, 64].choose(rng).unwrap(),
        epsilon_floor: rng.gen_range(0.01..=0.2),
        learning_rate: 10f64.powf(rng.gen_range(-5.0..=-3.0)),
        target_update_interval: *[1_000, 5_000, 10_000, 30_000].choose(rng).unwrap(),
    }
}

impl Draw {
    fn apply(&self, base: &DqnConfig, seed: u64) -> DqnConfig {
        DqnConfig {
            batch_size: self.batch_size,
            epsilon_floor: self.epsilon_floor,
            learning_rate: self.learning_rate,
            target_update_interval: self.target_update_interval,
            seed,
            ..base.clone()
        }
    }
}

/// Trains `runs` agents per step size and keeps the best greedy cost. Run `i`
/// uses the same draw and seed `seed + i` at every step size.
pub fn delta_sweep(ov: &Overrides, runs: Option<usize>, out: &Path) -> Result<()> {
    let mut cfg = Overrides {
        delta: Vec::new(),
        ..ov.clone()
    }
    .resolve()?;
    if !ov.delta.is_empty() {
        cfg.delta_sweep.deltas = ov.delta.clone();
    }
    if let Some(n) = runs {
        cfg.delta_sweep.runs = n;
    }
    cfg.validate()?;
    prepare(out)?;
    let mut manifest = RunManifest::begin("delta-sweep", &cfg);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.dqn.seed);
    let draws: Vec<Draw> = (0..cfg.delta_sweep.runs).map(|_| draw_hyperparameters(&mut rng)).collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.delta_sweep.deltas.len())
        .flat_map(|d| (0..draws.len()).map(move |r| (d, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(d, r)| -> Result<_> {
            let mut run = cfg.clone();
            run.set_delta(cfg.delta_sweep.deltas[d]);
            let env = run.env_config();
            let seed = cfg.dqn.seed.wrapping_add(r as u64);
            let mut trainer = Trainer::new(env, draws[r].apply(&cfg.dqn, seed))?;
            trainer.train()?;
            Ok((env, seed, evaluate_greedy(trainer.online(), &env)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut run_rows = Vec::new();
    let mut best_rows = Vec::new();
    for (d, &delta) in cfg.delta_sweep.deltas.iter().enumerate() {
        let mut best: Option<usize> = None;
        for (j, &(jd, r)) in jobs.iter().enumerate() {
            if jd != d {
                continue;
            }
            let (_, seed, eval) = &results[j];
            let draw = draws[r];
            run_rows.push([
                delta.to_string(),
                r.to_string(),
                seed.to_string(),
                draw.batch_size.to_string(),
                draw.epsilon_floor.to_string(),
                draw.learning_rate.to_string(),
                draw.target_update_interval.to_string(),
                eval.cost.to_string(),
            ]);
            if best.is_none_or(|b| eval.cost < results[b].2.cost) {
                best = Some(j);
            }
        }
        let b = best.expect("at least one run per step size");
        let (env, _, eval) = &results[b];
        let name = format!("traj_best_delta{delta}.csv");
        write_trajectory(&out.join(&name), &eval.trajectory)?;
        manifest.outputs.push(trajectory_output(name, "dqn", env, eval.cost));
        best_rows.push([delta.to_string(), eval.cost.to_string(), jobs[b].1.to_string()]);
    }
    write_csv(
        &out.join("delta_sweep_runs.csv"),
        &[
            "delta",
            "run",
            "seed",
            "batch_size",
            "epsilon_floor",
            "learning_rate",
            "target_update_interval",
            "cost",
        ],
        run_rows,
    )?;
    write_csv(&out.join("delta_sweep.csv"), &["delta", "best_cost", "best_run"], best_rows)?;
    manifest.outputs.push(OutputFile::new("delta_sweep_runs.csv", OutputKind::DeltaSweepRuns));
    manifest.outputs.push(OutputFile::new("delta_sweep.csv", OutputKind::DeltaSweep));
    manifest.finish(out)
}
