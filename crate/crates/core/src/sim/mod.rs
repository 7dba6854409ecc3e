//! Closed-loop racing simulation: single-integrator robot with box-bounded
//! process noise, noisy gate perception, a proportional stand-in policy, and
//! the optional safety filter between policy and plant.

mod experiment;
mod track;
mod trial;

pub use experiment::{
    run_experiment, track_seed, ExperimentResult, ExperimentSpec, GroupMetrics, TrialRecord,
};
pub use track::{generate_track, TrackSpec};
pub use trial::{run_trial, Mode, SafetyMaps, StepLog, TrialParams, TrialResult};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Pose, Vec3};

#[derive(Debug, Clone)]
pub struct SimState {
    pub x: Vec3,
    pub t: f64,
    /// Index of the next gate within the current lap.
    pub current_gate_index: usize,
    pub lap: usize,
    /// Perception error for the current next gate, held until it is passed.
    pub estimate_error: Vec3,
    rng: ChaCha8Rng,
}

impl SimState {
    pub fn new(x: Vec3, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Self {
            x,
            t: 0.0,
            current_gate_index: 0,
            lap: 0,
            estimate_error: Vec3::zeros(),
            rng,
        }
    }

    /// One Euler step of `x' = u + w` with `w_k ~ U(-dw_k, dw_k)`; returns `w`.
    pub fn step_dynamics(&mut self, u: &Vec3, dt: f64, dw: &Vec3) -> Vec3 {
        let w = uniform_box(&mut self.rng, dw);
        self.x += (u + w) * dt;
        self.t += dt;
        w
    }

    /// Draw a fresh perception error for the gate that just became next.
    pub fn redraw_estimate_error(&mut self, dv: &Vec3) {
        self.estimate_error = uniform_box(&mut self.rng, dv);
    }
}

fn uniform_box(rng: &mut ChaCha8Rng, half: &Vec3) -> Vec3 {
    Vec3::from_fn(|k, _| {
        if half[k] > 0.0 {
            rng.random_range(-half[k]..=half[k])
        } else {
            0.0
        }
    })
}

/// Estimated pose of the next gate: true position shifted by the held
/// perception error.
pub fn observe_gate(state: &SimState, track: &TrackSpec) -> Pose {
    let truth = track.gate_poses[state.current_gate_index];
    Pose::new(truth.position + state.estimate_error, truth.yaw)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    /// Proportional gain (1/s).
    pub gain: f64,
    /// Aim point distance beyond the gate plane along the gate normal (m).
    pub pass_through: f64,
    /// Fraction of the way toward the following gate the aim point is pulled,
    /// emulating a racing policy that cuts toward the next turn.
    pub lookahead: f64,
    /// Constant offset added to the aim point (m).
    pub aim_offset: Vec3,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            gain: 2.0,
            pass_through: 1.0,
            lookahead: 0.5,
            aim_offset: Vec3::zeros(),
        }
    }
}

pub fn policy_target(estimate: &Pose, following: Option<Vec3>, policy: &PolicyParams) -> Vec3 {
    let mut target = estimate.position
        + estimate.direction_to_world(&Vec3::new(policy.pass_through, 0.0, 0.0))
        + policy.aim_offset;
    if let Some(next) = following {
        target += (next - estimate.position) * policy.lookahead;
    }
    target
}

pub fn nominal_policy(x: &Vec3, target: &Vec3, gain: f64, alpha: f64) -> Vec3 {
    let u = (target - x) * gain;
    let n = u.norm();
    if n > alpha {
        u * (alpha / n)
    } else {
        u
    }
}
