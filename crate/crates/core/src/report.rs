//! Summary of a finished run directory: safety rate, mean success and
//! boxplot statistics of the per-trial minimum distances for every
//! (difficulty level, mode) group.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use csv::{Reader, StringRecord};

use crate::error::{Error, Result};
use crate::output::{METRICS_FILE, METRICS_HEADER, MIN_DISTANCES_FILE, MIN_DISTANCES_HEADER};

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

/// Tukey boxplot summary with 1.5·IQR whiskers.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub n: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    let fence = 1.5 * (q3 - q1);
    let (lo_fence, hi_fence) = (q1 - fence, q3 + fence);
    let inside = v
        .iter()
        .copied()
        .filter(|x| (lo_fence..=hi_fence).contains(x));
    // Clamped to the box when interpolated quartiles pass the inner data.
    let whisker_low = inside.clone().fold(f64::INFINITY, f64::min).min(q1);
    let whisker_high = inside.fold(f64::NEG_INFINITY, f64::max).max(q3);
    Some(BoxStats {
        n: v.len(),
        q1,
        median: quantile(&v, 0.5),
        q3,
        whisker_low,
        whisker_high,
        outliers: v
            .iter()
            .copied()
            .filter(|x| !(lo_fence..=hi_fence).contains(x))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub level: String,
    pub mode: String,
    pub trials: usize,
    pub safety_rate: f64,
    pub mean_success: f64,
    pub min_distances: Vec<f64>,
    pub stats: BoxStats,
}

fn open(path: &Path) -> Result<Reader<fs::File>> {
    if !path.is_file() {
        return Err(Error::MissingInput {
            path: path.to_path_buf(),
        });
    }
    Reader::from_path(path).map_err(|e| Error::io(path, e.into()))
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::MalformedInput {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn records(path: &Path, header: &[&str]) -> Result<Vec<(u64, StringRecord)>> {
    let mut rdr = open(path)?;
    let found = rdr
        .headers()
        .map_err(|e| malformed(path, 1, e.to_string()))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(malformed(
            path,
            1,
            format!("expected header {}", header.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    rec: &StringRecord,
    i: usize,
    name: &str,
) -> Result<T> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
        malformed(
            path,
            line,
            format!("bad {name} value {:?}", rec.get(i).unwrap_or("")),
        )
    })
}

/// Read `metrics.csv` and `min_distances.csv` from a run directory.
pub fn load_report(run_dir: &Path) -> Result<Vec<ReportRow>> {
    if !run_dir.is_dir() {
        return Err(Error::MissingInput {
            path: run_dir.to_path_buf(),
        });
    }
    let metrics_path = run_dir.join(METRICS_FILE);
    let dist_path = run_dir.join(MIN_DISTANCES_FILE);
    let metrics = records(&metrics_path, &METRICS_HEADER)?;
    let dists = records(&dist_path, &MIN_DISTANCES_HEADER)?;

    let mut samples: Vec<(String, String, f64)> = Vec::with_capacity(dists.len());
    for (line, rec) in &dists {
        let d: f64 = field(&dist_path, *line, rec, 6, "min_distance")?;
        if d.is_nan() || d < 0.0 {
            return Err(malformed(
                &dist_path,
                *line,
                format!("min_distance {d} is negative or NaN"),
            ));
        }
        samples.push((rec[0].to_string(), rec[1].to_string(), d));
    }

    let mut rows = Vec::with_capacity(metrics.len());
    for (line, rec) in &metrics {
        let level = rec[0].to_string();
        let mode = rec[1].to_string();
        let trials: usize = field(&metrics_path, *line, rec, 2, "trials")?;
        let safety_rate: f64 = field(&metrics_path, *line, rec, 3, "safety_rate")?;
        let mean_success: f64 = field(&metrics_path, *line, rec, 4, "mean_success")?;
        let min_distances: Vec<f64> = samples
            .iter()
            .filter(|(l, m, _)| *l == level && *m == mode)
            .map(|s| s.2)
            .collect();
        if min_distances.len() != trials {
            return Err(malformed(
                &metrics_path,
                *line,
                format!(
                    "group ({level}, {mode}) lists {trials} trials but {} has {}",
                    MIN_DISTANCES_FILE,
                    min_distances.len()
                ),
            ));
        }
        let stats = box_stats(&min_distances).ok_or_else(|| {
            malformed(
                &metrics_path,
                *line,
                format!("group ({level}, {mode}) has no trials"),
            )
        })?;
        rows.push(ReportRow {
            level,
            mode,
            trials,
            safety_rate,
            mean_success,
            min_distances,
            stats,
        });
    }
    Ok(rows)
}

const COLUMNS: [&str; 12] = [
    "level",
    "mode",
    "trials",
    "safety_rate",
    "success_pct",
    "whisker_low",
    "q1",
    "median",
    "q3",
    "whisker_high",
    "outliers",
    "min_distances",
];

fn cells(row: &ReportRow) -> [String; 12] {
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let s = &row.stats;
    [
        row.level.clone(),
        row.mode.clone(),
        row.trials.to_string(),
        format!("{:.3}", row.safety_rate),
        format!("{:.1}", 100.0 * row.mean_success),
        format!("{:.4}", s.whisker_low),
        format!("{:.4}", s.q1),
        format!("{:.4}", s.median),
        format!("{:.4}", s.q3),
        format!("{:.4}", s.whisker_high),
        join(&s.outliers),
        join(&row.min_distances),
    ]
}

pub fn report_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    w.write_record(COLUMNS).map_err(to_err)?;
    for row in rows {
        w.write_record(cells(row)).map_err(to_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Aligned plain-text table; the raw min-distance list is omitted.
pub fn report_text(rows: &[ReportRow]) -> String {
    let shown = COLUMNS.len() - 1;
    let table: Vec<[String; 12]> = rows.iter().map(cells).collect();
    let widths: Vec<usize> = (0..shown)
        .map(|c| {
            table
                .iter()
                .map(|r| r[c].len())
                .chain([COLUMNS[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let mut line = |items: Vec<&str>| {
        let padded: Vec<String> = items
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(COLUMNS[..shown].to_vec());
    for r in &table {
        line(r[..shown].iter().map(String::as_str).collect());
    }
    out
}

/// Load a run directory, write `report.csv` and `report.txt` into it and
/// return the text table.
pub fn report(run_dir: &Path) -> Result<String> {
    let rows = load_report(run_dir)?;
    let csv = report_csv(&rows)?;
    let text = report_text(&rows);
    let p = run_dir.join(REPORT_CSV);
    fs::write(&p, csv).map_err(|e| Error::io(&p, e))?;
    let p = run_dir.join(REPORT_TXT);
    fs::write(&p, &text).map_err(|e| Error::io(&p, e))?;
    Ok(text)
}
