use rayon::prelude::*;

use super::{generate_track, run_trial, Mode, SafetyMaps, TrialParams, TrialResult};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub level: f64,
    pub mode: Mode,
    pub track_index: usize,
    pub seed: u64,
    pub result: TrialResult,
}

/// Aggregates for one (difficulty level, mode) cell of the experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    pub level: f64,
    pub mode: Mode,
    pub trials: usize,
    pub safety_rate: f64,
    pub mean_success: f64,
    /// Per-trial minimum distances in track order.
    pub min_distances: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub trials: Vec<TrialRecord>,
    pub groups: Vec<GroupMetrics>,
}

impl ExperimentResult {
    pub fn group(&self, level: f64, mode: Mode) -> Option<&GroupMetrics> {
        self.groups
            .iter()
            .find(|g| g.level == level && g.mode == mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSpec<'a> {
    pub levels: &'a [f64],
    pub tracks_per_level: usize,
    pub modes: &'a [Mode],
    pub num_gates: usize,
    pub spacing: f64,
    pub laps: usize,
    pub base_seed: u64,
}

/// Seed of track `track_index` at level position `level_index`. Every mode
/// flies the same track with the same noise stream.
pub fn track_seed(base_seed: u64, level_index: usize, track_index: usize) -> u64 {
    base_seed
        .wrapping_add(1000 * level_index as u64)
        .wrapping_add(track_index as u64)
}

pub fn run_experiment(
    spec: &ExperimentSpec<'_>,
    params: &TrialParams,
    maps: &SafetyMaps,
) -> Result<ExperimentResult> {
    let jobs: Vec<(usize, usize, Mode)> = (0..spec.levels.len())
        .flat_map(|li| {
            spec.modes
                .iter()
                .flat_map(move |&m| (0..spec.tracks_per_level).map(move |t| (li, t, m)))
        })
        .collect();

    let trials = jobs
        .par_iter()
        .map(|&(li, t, mode)| {
            let level = spec.levels[li];
            let seed = track_seed(spec.base_seed, li, t);
            let track = generate_track(spec.num_gates, spec.spacing, level, spec.laps, seed);
            let result = run_trial(&track, mode, params, maps, seed)?;
            Ok(TrialRecord {
                level,
                mode,
                track_index: t,
                seed,
                result,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut groups = Vec::new();
    for &level in spec.levels {
        for &mode in spec.modes {
            let members: Vec<&TrialRecord> = trials
                .iter()
                .filter(|r| r.level == level && r.mode == mode)
                .collect();
            let n = members.len();
            let safe = members.iter().filter(|r| r.result.safe).count();
            let success: f64 = members.iter().map(|r| r.result.success_pct).sum();
            groups.push(GroupMetrics {
                level,
                mode,
                trials: n,
                safety_rate: if n > 0 { safe as f64 / n as f64 } else { 0.0 },
                mean_success: if n > 0 { success / n as f64 } else { 0.0 },
                min_distances: members.iter().map(|r| r.result.min_distance).collect(),
            });
        }
    }
    Ok(ExperimentResult { trials, groups })
}
