//! CSV and manifest files written by the command-line tool.
//!
//! Floats are printed with Rust's shortest round-trip formatting so reruns
//! with the same inputs produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use csv::Writer;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::filter::ActionMap;
use crate::sim::{ExperimentResult, TrialRecord};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MIN_DISTANCES_FILE: &str = "min_distances.csv";
pub const TRAJECTORY_DIR: &str = "trajectories";

pub const METRICS_HEADER: [&str; 6] = [
    "level",
    "mode",
    "trials",
    "safety_rate",
    "mean_success",
    "median_min_distance",
];

pub const MIN_DISTANCES_HEADER: [&str; 9] = [
    "level",
    "mode",
    "track",
    "seed",
    "safe",
    "success",
    "min_distance",
    "gates_passed",
    "infeasible_steps",
];

fn csv_writer(path: &Path) -> Result<Writer<fs::File>> {
    Writer::from_path(path).map_err(|e| Error::io(path, e.into()))
}

fn write_row<I, S>(w: &mut Writer<fs::File>, path: &Path, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::io(path, e.into()))
}

fn finish(mut w: Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

pub fn trajectory_file_name(rec: &TrialRecord) -> String {
    format!(
        "level{}_{}_track{:02}.csv",
        rec.level, rec.mode, rec.track_index
    )
}

/// Write the manifest, metrics, min-distance table and per-trial
/// trajectories of an experiment into `dir`.
pub fn write_run(dir: &Path, config: &Config, result: &ExperimentResult) -> Result<()> {
    let traj_dir = dir.join(TRAJECTORY_DIR);
    fs::create_dir_all(&traj_dir).map_err(|e| Error::io(&traj_dir, e))?;

    let manifest = dir.join(MANIFEST_FILE);
    fs::write(&manifest, config.manifest()).map_err(|e| Error::io(&manifest, e))?;

    let path = dir.join(METRICS_FILE);
    let mut w = csv_writer(&path)?;
    write_row(&mut w, &path, METRICS_HEADER)?;
    for g in &result.groups {
        write_row(
            &mut w,
            &path,
            [
                g.level.to_string(),
                g.mode.to_string(),
                g.trials.to_string(),
                g.safety_rate.to_string(),
                g.mean_success.to_string(),
                median(&g.min_distances).to_string(),
            ],
        )?;
    }
    finish(w, &path)?;

    let path = dir.join(MIN_DISTANCES_FILE);
    let mut w = csv_writer(&path)?;
    write_row(&mut w, &path, MIN_DISTANCES_HEADER)?;
    for rec in &result.trials {
        let r = &rec.result;
        write_row(
            &mut w,
            &path,
            [
                rec.level.to_string(),
                rec.mode.to_string(),
                rec.track_index.to_string(),
                rec.seed.to_string(),
                u8::from(r.safe).to_string(),
                r.success_pct.to_string(),
                r.min_distance.to_string(),
                r.gates_passed.to_string(),
                r.infeasible_steps.to_string(),
            ],
        )?;
    }
    finish(w, &path)?;

    for rec in &result.trials {
        write_trajectory(&traj_dir.join(trajectory_file_name(rec)), rec)?;
    }
    Ok(())
}

pub fn write_trajectory(path: &Path, rec: &TrialRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        ["t", "x", "y", "z", "d", "h", "status", "deviation"],
    )?;
    for s in &rec.result.steps {
        write_row(
            &mut w,
            path,
            [
                s.t.to_string(),
                s.x.x.to_string(),
                s.x.y.to_string(),
                s.x.z.to_string(),
                s.d.to_string(),
                s.h.to_string(),
                s.status.to_string(),
                s.deviation.to_string(),
            ],
        )?;
    }
    finish(w, path)
}

/// Rows `x, y, z, ux, uy, uz, unsafe_flag`; unsafe cells carry a zero action.
pub fn write_action_map(path: &Path, map: &ActionMap) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(
        &mut w,
        path,
        ["x", "y", "z", "ux", "uy", "uz", "unsafe_flag"],
    )?;
    for c in &map.cells {
        let u = c.action.unwrap_or_default();
        write_row(
            &mut w,
            path,
            [
                c.position.x.to_string(),
                c.position.y.to_string(),
                c.position.z.to_string(),
                u.x.to_string(),
                u.y.to_string(),
                u.z.to_string(),
                u8::from(c.is_unsafe()).to_string(),
            ],
        )?;
    }
    finish(w, path)
}

/// All regular files under `dir`, sorted, relative to it.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else if let Ok(rel) = path.strip_prefix(root) {
                out.push(rel.to_path_buf());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
