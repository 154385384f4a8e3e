//! CSV artifacts. Floats are written in shortest round-trip form.

use std::path::Path;

use anyhow::{bail, Context, Result};
use fracdose::Trajectory;

pub const TRAJECTORY_HEADER: [&str; 8] = ["t", "S", "R", "N", "phi", "u", "c", "r"];

/// Writes a header and rows of already formatted fields.
pub fn write_csv<I, R, S>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per grid point. `u`, `c` and `r` belong to the step that ends at
/// `t` and are empty on the initial row.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let rows = traj.points.iter().map(|p| {
        [
            p.time.to_string(),
            p.state.susceptible.to_string(),
            p.state.resistant.to_string(),
            p.state.total().to_string(),
            p.fraction().to_string(),
            opt(p.control),
            opt(p.growth),
            opt(p.reward()),
        ]
    });
    write_csv(path, &TRAJECTORY_HEADER, rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub s: f64,
    pub r: f64,
    pub n: f64,
    pub phi: f64,
    pub u: Option<f64>,
    pub c: Option<f64>,
    pub reward: Option<f64>,
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = reader.headers()?.clone();
    if header.iter().ne(TRAJECTORY_HEADER) {
        bail!("{}: unexpected columns {:?}", path.display(), header);
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .with_context(|| format!("{} row {}: bad {}", path.display(), line + 1, TRAJECTORY_HEADER[i]))
        };
        let maybe = |i: usize| -> Result<Option<f64>> {
            if record[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        rows.push(TrajectoryRow {
            t: num(0)?,
            s: num(1)?,
            r: num(2)?,
            n: num(3)?,
            phi: num(4)?,
            u: maybe(5)?,
            c: maybe(6)?,
            reward: maybe(7)?,
        });
    }
    if rows.is_empty() {
        bail!("{}: empty trajectory", path.display());
    }
    Ok(rows)
}

/// `log(N_T / N_0)` from the population column.
pub fn trajectory_cost(rows: &[TrajectoryRow]) -> f64 {
    (rows[rows.len() - 1].n / rows[0].n).ln()
}
