use std::fmt;
use std::str::FromStr;

use super::{nominal_policy, observe_gate, policy_target, PolicyParams, SimState, TrackSpec};
use crate::barrier::{assemble_constraint, eval_barrier, SafetyParams};
use crate::error::{Error, Result};
use crate::field::DistanceField;
use crate::filter::{filter_action, FilterStatus};
use crate::geometry::{GateGeometry, Vec3};

/// Clearance inside the opening required for a crossing to count as a pass.
pub const PASS_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Baseline,
    Filtered,
    FilteredUncertainty,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Baseline, Mode::Filtered, Mode::FilteredUncertainty];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Filtered => "filtered",
            Mode::FilteredUncertainty => "filtered_uncertainty",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mode `{s}`")))
    }
}

/// Nominal map and its worst-case inflation, shared by every trial.
#[derive(Debug, Clone)]
pub struct SafetyMaps {
    pub nominal: DistanceField,
    pub inflated: DistanceField,
}

impl SafetyMaps {
    fn for_mode(&self, mode: Mode) -> &DistanceField {
        match mode {
            Mode::FilteredUncertainty => &self.inflated,
            _ => &self.nominal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialParams {
    pub gate: GateGeometry,
    pub safety: SafetyParams,
    pub policy: PolicyParams,
    pub dt: f64,
    /// Trial timeout (s).
    pub max_time: f64,
}

impl Default for TrialParams {
    fn default() -> Self {
        Self {
            gate: GateGeometry::default(),
            safety: SafetyParams::default(),
            policy: PolicyParams::default(),
            dt: 0.02,
            max_time: 120.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub t: f64,
    pub x: Vec3,
    /// Barrier distance from the mode's map relative to the estimated gate;
    /// NaN when the robot is outside the map.
    pub d: f64,
    pub h: f64,
    pub status: FilterStatus,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub safe: bool,
    /// Fraction of gate traversals completed through the opening.
    pub success_pct: f64,
    /// Closest exact distance to the next gate over the trial, 0 on collision.
    pub min_distance: f64,
    pub gates_passed: usize,
    pub gates_total: usize,
    pub infeasible_steps: usize,
    pub steps: Vec<StepLog>,
}

fn setup_checks(track: &TrackSpec, params: &TrialParams) -> Result<()> {
    params.gate.validate()?;
    params.safety.validate()?;
    if !(params.dt > 0.0 && params.dt.is_finite()) {
        return Err(Error::Setup(format!(
            "dt must be positive, got {}",
            params.dt
        )));
    }
    if track.num_gates == 0 || track.gate_poses.len() != track.num_gates || track.laps == 0 {
        return Err(Error::Setup(
            "track needs at least one gate and one lap".into(),
        ));
    }
    for (k, pose) in track.gate_poses.iter().enumerate() {
        if params.gate.exact_distance(&pose.to_local(&track.spawn))? < 0.0 {
            return Err(Error::Setup(format!("spawn lies inside gate {k}")));
        }
    }
    let d0 = params
        .gate
        .exact_distance(&track.gate_poses[0].to_local(&track.spawn))?;
    if d0 < params.safety.radius {
        return Err(Error::Setup(format!(
            "spawn is {d0:.3} m from gate 0, inside the {:.3} m safety radius",
            params.safety.radius
        )));
    }
    Ok(())
}

/// Fly `laps` laps of `track` and score the run.
pub fn run_trial(
    track: &TrackSpec,
    mode: Mode,
    params: &TrialParams,
    maps: &SafetyMaps,
    seed: u64,
) -> Result<TrialResult> {
    setup_checks(track, params)?;
    let gate = &params.gate;
    let safety = &params.safety;
    let field = maps.for_mode(mode);
    let opening = gate.inner_half() - PASS_MARGIN;
    let gates_total = track.num_gates * track.laps;
    let max_steps = (params.max_time / params.dt).ceil() as usize;

    let mut state = SimState::new(track.spawn, seed);
    state.redraw_estimate_error(&safety.dv);
    let mut steps = Vec::new();
    let mut visited = 0;
    let mut passed = 0;
    let mut infeasible_steps = 0;
    let mut collided = false;
    let mut min_distance = f64::INFINITY;

    for _ in 0..max_steps {
        if visited == gates_total {
            break;
        }
        let truth = track.gate_poses[state.current_gate_index];
        let estimate = observe_gate(&state, track);
        let following = track
            .following_position(state.current_gate_index, state.lap)
            .map(|p| p + state.estimate_error);
        let target = policy_target(&estimate, following, &params.policy);
        let u_nominal = nominal_policy(&state.x, &target, params.policy.gain, safety.alpha);

        let local = estimate.to_local(&state.x);
        let (u, status, deviation, d, h) = match eval_barrier(field, &local, safety) {
            Ok(ev) if mode == Mode::Baseline => {
                (u_nominal, FilterStatus::Unchanged, 0.0, ev.d, ev.h)
            }
            Ok(ev) => {
                let c = assemble_constraint(&ev, safety).rotated(&estimate.rotation());
                let dec = filter_action(&u_nominal, &c, safety);
                (dec.u_star, dec.status, dec.deviation, ev.d, ev.h)
            }
            Err(Error::OutOfBounds { .. }) => {
                (u_nominal, FilterStatus::Unchanged, 0.0, f64::NAN, f64::NAN)
            }
            Err(Error::InObstacle { .. }) if mode == Mode::Baseline => {
                (u_nominal, FilterStatus::Unchanged, 0.0, f64::NAN, f64::NAN)
            }
            // Map cell touches the (possibly inflated) obstacle: hold position.
            Err(Error::InObstacle { .. }) => (
                Vec3::zeros(),
                FilterStatus::InfeasibleFallback,
                u_nominal.norm(),
                f64::NAN,
                f64::NAN,
            ),
            Err(e) => return Err(e),
        };
        if status == FilterStatus::InfeasibleFallback {
            infeasible_steps += 1;
        }
        steps.push(StepLog {
            t: state.t,
            x: state.x,
            d,
            h,
            status,
            deviation,
        });

        let x0 = state.x;
        state.step_dynamics(&u, params.dt, &safety.dw);
        let x1 = state.x;

        collided = track.gate_poses.iter().any(|pose| {
            let (p0, p1) = (pose.to_local(&x0), pose.to_local(&x1));
            gate.distance_unchecked(&p1) < 0.0 || gate.segment_hits(&p0, &p1)
        });
        if collided {
            break;
        }
        let (p0, p1) = (truth.to_local(&x0), truth.to_local(&x1));
        min_distance = min_distance.min(gate.distance_unchecked(&p1));

        if p0.x < 0.0 && p1.x >= 0.0 {
            let s = -p0.x / (p1.x - p0.x);
            let cross = p0 + (p1 - p0) * s;
            if cross.y.abs() < opening && cross.z.abs() < opening {
                passed += 1;
            }
            visited += 1;
            state.current_gate_index += 1;
            if state.current_gate_index == track.num_gates {
                state.current_gate_index = 0;
                state.lap += 1;
                if state.lap < track.laps {
                    state.x += track.lap_shift();
                }
            }
            state.redraw_estimate_error(&safety.dv);
        }
    }

    Ok(TrialResult {
        safe: !collided,
        success_pct: passed as f64 / gates_total as f64,
        min_distance: if collided { 0.0 } else { min_distance },
        gates_passed: passed,
        gates_total,
        infeasible_steps,
        steps,
    })
}
