//! Square racing-gate obstacle.
//!
//! The gate lies in its local YZ plane and is flown through along local +X.
//! Its solid part is the union of four axis-aligned bars; everything else is
//! free space.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Surface tolerance for region classification (meters).
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Sentinel distance reported for points inside the solid frame.
pub const INSIDE_DISTANCE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    Inside,
    Boundary,
    Outside,
}

/// Axis-aligned box given by its min and max corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// Euclidean distance from `q` to the box, zero inside.
    pub fn distance(&self, q: &Vec3) -> f64 {
        let mut acc = 0.0;
        for k in 0..3 {
            let e = (self.min[k] - q[k]).max(q[k] - self.max[k]).max(0.0);
            acc += e * e;
        }
        acc.sqrt()
    }

    /// Depth of `q` below the nearest face; positive only strictly inside.
    pub fn depth(&self, q: &Vec3) -> f64 {
        (0..3)
            .map(|k| (q[k] - self.min[k]).min(self.max[k] - q[k]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the segment `p0 -> p1` touches the closed box (slab test).
    pub fn intersects_segment(&self, p0: &Vec3, p1: &Vec3) -> bool {
        let dir = p1 - p0;
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        for k in 0..3 {
            if dir[k].abs() < 1e-15 {
                if p0[k] < self.min[k] || p0[k] > self.max[k] {
                    return false;
                }
                continue;
            }
            let inv = 1.0 / dir[k];
            let mut ta = (self.min[k] - p0[k]) * inv;
            let mut tb = (self.max[k] - p0[k]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateGeometry {
    /// Side length of the square opening (m).
    pub inner_size: f64,
    /// Side of the square bar cross-section (m).
    pub bar_thickness: f64,
}

impl Default for GateGeometry {
    fn default() -> Self {
        Self {
            inner_size: 1.5,
            bar_thickness: 0.25,
        }
    }
}

impl GateGeometry {
    pub fn new(inner_size: f64, bar_thickness: f64) -> Result<Self> {
        let g = Self {
            inner_size,
            bar_thickness,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inner_size.is_finite() && self.inner_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "inner_size must be positive, got {}",
                self.inner_size
            )));
        }
        if !(self.bar_thickness.is_finite() && self.bar_thickness > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bar_thickness must be positive, got {}",
                self.bar_thickness
            )));
        }
        Ok(())
    }

    pub fn outer_size(&self) -> f64 {
        self.inner_size + 2.0 * self.bar_thickness
    }

    pub fn inner_half(&self) -> f64 {
        0.5 * self.inner_size
    }

    pub fn outer_half(&self) -> f64 {
        0.5 * self.outer_size()
    }

    /// Top, bottom, right and left bars. Corner squares belong to two bars.
    pub fn bars(&self) -> [Aabb; 4] {
        let hx = 0.5 * self.bar_thickness;
        let (i, o) = (self.inner_half(), self.outer_half());
        let b = |y0: f64, y1: f64, z0: f64, z1: f64| Aabb {
            min: Vec3::new(-hx, y0, z0),
            max: Vec3::new(hx, y1, z1),
        };
        [
            b(-o, o, i, o),
            b(-o, o, -o, -i),
            b(i, o, -o, o),
            b(-o, -i, -o, o),
        ]
    }

    /// Axis-aligned bounds of the whole frame.
    pub fn bounds(&self) -> Aabb {
        let hx = 0.5 * self.bar_thickness;
        let o = self.outer_half();
        Aabb {
            min: Vec3::new(-hx, -o, -o),
            max: Vec3::new(hx, o, o),
        }
    }

    pub fn classify_point(&self, q: &Vec3) -> Result<RegionLabel> {
        check_finite(q)?;
        let bars = self.bars();
        if bars.iter().any(|b| b.depth(q) > BOUNDARY_TOL) {
            return Ok(RegionLabel::Inside);
        }
        let dist = bars
            .iter()
            .map(|b| b.distance(q))
            .fold(f64::INFINITY, f64::min);
        Ok(if dist <= BOUNDARY_TOL {
            RegionLabel::Boundary
        } else {
            RegionLabel::Outside
        })
    }

    /// Distance to the frame, or exactly `-1` inside it.
    pub fn exact_distance(&self, q: &Vec3) -> Result<f64> {
        check_finite(q)?;
        Ok(self.distance_unchecked(q))
    }

    pub(crate) fn distance_unchecked(&self, q: &Vec3) -> f64 {
        let bars = self.bars();
        if bars.iter().any(|b| b.depth(q) > BOUNDARY_TOL) {
            return INSIDE_DISTANCE;
        }
        let d = bars
            .iter()
            .map(|b| b.distance(q))
            .fold(f64::INFINITY, f64::min);
        if d <= BOUNDARY_TOL {
            0.0
        } else {
            d
        }
    }

    /// Whether the gate-local segment touches the solid frame.
    pub fn segment_hits(&self, p0: &Vec3, p1: &Vec3) -> bool {
        self.bars().iter().any(|b| b.intersects_segment(p0, p1))
    }
}

fn check_finite(q: &Vec3) -> Result<()> {
    if q.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "non-finite point ({}, {}, {})",
            q.x, q.y, q.z
        )))
    }
}

/// Normalize an angle to (-pi, pi].
pub fn normalize_yaw(yaw: f64) -> f64 {
    let mut a = yaw.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Gate placement in the world: position plus yaw about world Z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vec3::z_axis(), self.yaw)
    }

    pub fn to_local(&self, x: &Vec3) -> Vec3 {
        self.rotation().inverse() * (x - self.position)
    }

    pub fn to_world(&self, q: &Vec3) -> Vec3 {
        self.rotation() * q + self.position
    }

    /// Rotate a gate-local direction into the world frame.
    pub fn direction_to_world(&self, v: &Vec3) -> Vec3 {
        self.rotation() * v
    }
}

pub fn world_to_gate_frame(x: &Vec3, gate_pose: &Pose) -> Result<Vec3> {
    check_finite(x)?;
    check_finite(&gate_pose.position)?;
    if !gate_pose.yaw.is_finite() {
        return Err(Error::InvalidArgument("non-finite yaw".into()));
    }
    Ok(gate_pose.to_local(x))
}
