//! Tables assembled from earlier artifact directories.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fracdose::baselines::pulse_frequency;

use crate::config::RunConfig;
use crate::io::{read_trajectory, trajectory_cost, write_csv};
use crate::manifest::{OutputFile, OutputKind, RunManifest};

/// Largest disagreement tolerated between a recorded cost and the cost
/// recomputed from its trajectory file.
pub const COST_TOLERANCE: f64 = 1e-9;

struct Source {
    dir: PathBuf,
    manifest: RunManifest,
}

fn source_name(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn report(dirs: &[PathBuf], out: &Path) -> Result<()> {
    if dirs.is_empty() {
        bail!("report needs at least one run directory");
    }
    let mut sources = Vec::new();
    for dir in dirs {
        let manifest = RunManifest::load(dir)?;
        if manifest.command == "report" {
            bail!("{}: report directories cannot be inputs", dir.display());
        }
        sources.push(Source {
            dir: dir.clone(),
            manifest,
        });
    }

    let mut costs = Vec::new();
    let mut frequencies = Vec::new();
    let mut fractions = Vec::new();
    let mut by_delta = Vec::new();
    for src in &sources {
        let name = source_name(&src.dir);
        for file in &src.manifest.outputs {
            match file.kind {
                OutputKind::Trajectory => {
                    let path = src.dir.join(&file.path);
                    let rows = read_trajectory(&path)?;
                    let cost = trajectory_cost(&rows);
                    let recorded = file
                        .cost
                        .with_context(|| format!("{}: manifest records no cost", path.display()))?;
                    if !((cost - recorded).abs() <= COST_TOLERANCE) {
                        bail!(
                            "{}: cost {cost} recomputed from the file differs from recorded {recorded}",
                            path.display()
                        );
                    }
                    let delta = file.delta.with_context(|| format!("{}: no step size recorded", path.display()))?;
                    let policy = file.policy.clone().unwrap_or_default();
                    let file_name = file.path.display().to_string();
                    costs.push([
                        name.clone(),
                        policy.clone(),
                        fmt(file.mu),
                        delta.to_string(),
                        (rows.len() - 1).to_string(),
                        cost.to_string(),
                        file_name.clone(),
                    ]);
                    let controls: Vec<f64> = rows.iter().filter_map(|r| r.u).collect();
                    let window = ((1.0 / delta).round() as usize).max(1);
                    for (t, f) in pulse_frequency(&controls, delta, window, 1) {
                        frequencies.push([
                            name.clone(),
                            policy.clone(),
                            fmt(file.mu),
                            file_name.clone(),
                            t.to_string(),
                            f.to_string(),
                        ]);
                    }
                    let mean = rows.iter().map(|r| r.phi).sum::<f64>() / rows.len() as f64;
                    fractions.push([name.clone(), policy, fmt(file.mu), mean.to_string(), file_name]);
                }
                OutputKind::DeltaSweep => {
                    let path = src.dir.join(&file.path);
                    let mut reader =
                        csv::Reader::from_path(&path).with_context(|| format!("opening {}", path.display()))?;
                    for record in reader.records() {
                        let record = record?;
                        by_delta.push([
                            name.clone(),
                            fmt(Some(src.manifest.config.model.mu)),
                            record[0].to_string(),
                            record[1].to_string(),
                        ]);
                    }
                }
                _ => {}
            }
        }
    }

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_csv(
        &out.join("cost_table.csv"),
        &["source", "policy", "mu", "delta", "steps", "cost", "file"],
        costs,
    )?;
    write_csv(
        &out.join("pulse_frequency.csv"),
        &["source", "policy", "mu", "file", "t_mid", "toggles_per_hour"],
        frequencies,
    )?;
    write_csv(
        &out.join("mean_fraction.csv"),
        &["source", "policy", "mu", "mean_phi", "file"],
        fractions,
    )?;
    write_csv(
        &out.join("cost_vs_delta.csv"),
        &["source", "mu", "delta", "best_cost"],
        by_delta,
    )?;

    let mut manifest = RunManifest::begin("report", &RunConfig::default());
    manifest.config = sources[0].manifest.config.clone();
    manifest.seed = sources[0].manifest.seed;
    for (path, kind) in [
        ("cost_table.csv", OutputKind::CostTable),
        ("pulse_frequency.csv", OutputKind::PulseFrequency),
        ("mean_fraction.csv", OutputKind::MeanFraction),
        ("cost_vs_delta.csv", OutputKind::CostVsDelta),
    ] {
        manifest.outputs.push(OutputFile::new(path, kind));
    }
    manifest.notes.push(format!(
        "inputs: {}",
        dirs.iter().map(|d| d.display().to_string()).collect::<Vec<_>>().join(", ")
    ));
    manifest
        .notes
        .push("mean_phi is the time average of phi over every row of the trajectory".into());
    manifest.notes.push(
        "pulse frequency: dose changes per hour in a sliding one-hour window advanced one step at a time, at the window midpoint"
            .into(),
    );
    manifest.finish(out)
}
