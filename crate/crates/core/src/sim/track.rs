use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Pose, Vec3};

/// Unrolled racing track: gates advance along world +X with bounded lateral
/// and vertical jumps between consecutive centers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSpec {
    pub num_gates: usize,
    pub spacing: f64,
    /// Largest per-axis offset between consecutive gate centers (m).
    pub difficulty: f64,
    pub gate_poses: Vec<Pose>,
    pub laps: usize,
    pub seed: u64,
    /// Robot start position, one spacing in front of gate 0.
    pub spawn: Vec3,
}

impl TrackSpec {
    /// World position of the gate that follows `gate`, accounting for the lap
    /// wrap. `None` after the final gate of the final lap.
    pub fn following_position(&self, gate: usize, lap: usize) -> Option<Vec3> {
        if gate + 1 < self.num_gates {
            Some(self.gate_poses[gate + 1].position)
        } else if lap + 1 < self.laps {
            Some(self.gate_poses[gate].position + Vec3::new(self.spacing, 0.0, 0.0))
        } else {
            None
        }
    }

    /// Translation applied to the robot when a lap closes: the last gate is
    /// mapped onto a virtual gate one spacing before gate 0.
    pub fn lap_shift(&self) -> Vec3 {
        let first = self.gate_poses[0].position;
        let last = self.gate_poses[self.num_gates - 1].position;
        first - Vec3::new(self.spacing, 0.0, 0.0) - last
    }
}

pub fn generate_track(
    num_gates: usize,
    spacing: f64,
    difficulty: f64,
    laps: usize,
    seed: u64,
) -> TrackSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut poses = Vec::with_capacity(num_gates);
    let mut prev = Vec3::zeros();
    for k in 0..num_gates {
        let (pos, yaw) = if k == 0 {
            (Vec3::zeros(), 0.0)
        } else {
            let (dy, dz) = if difficulty > 0.0 {
                (
                    rng.random_range(-difficulty..=difficulty),
                    rng.random_range(-difficulty..=difficulty),
                )
            } else {
                (0.0, 0.0)
            };
            let pos = Vec3::new(k as f64 * spacing, prev.y + dy, prev.z + dz);
            (pos, dy.atan2(spacing))
        };
        poses.push(Pose::new(pos, yaw));
        prev = pos;
    }
    TrackSpec {
        num_gates,
        spacing,
        difficulty,
        gate_poses: poses,
        laps,
        seed,
        spawn: Vec3::new(-spacing, 0.0, 0.0),
    }
}
