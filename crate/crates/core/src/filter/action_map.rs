//! Safest-action maps over a planar slice of a distance field: at each node,
//! the sampled fixed-speed action with the largest barrier margin, or an
//! unsafe marker when no sampled direction satisfies the constraint.

use std::f64::consts::TAU;
use std::str::FromStr;

use rayon::prelude::*;

use crate::barrier::{assemble_constraint, BarrierConstraint, BarrierEval, SafetyParams};
use crate::error::{Error, Result};
use crate::field::DistanceField;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneAxis {
    /// Horizontal slice at fixed z.
    Xy,
    /// Gate-plane slice at fixed x.
    Yz,
}

impl FromStr for PlaneAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xy" => Ok(PlaneAxis::Xy),
            "yz" => Ok(PlaneAxis::Yz),
            other => Err(Error::InvalidArgument(format!(
                "unknown plane `{other}`, expected xy or yz"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub axis: PlaneAxis,
    pub offset: f64,
}

impl Plane {
    /// Grid axes spanning the plane, and the fixed axis.
    fn axes(&self) -> ([usize; 2], usize) {
        match self.axis {
            PlaneAxis::Xy => ([0, 1], 2),
            PlaneAxis::Yz => ([1, 2], 0),
        }
    }

    fn direction(&self, theta: f64) -> Vec3 {
        let ([u, v], _) = self.axes();
        let mut d = Vec3::zeros();
        d[u] = theta.cos();
        d[v] = theta.sin();
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionCell {
    pub position: Vec3,
    /// Safest sampled action, `None` when every direction violates the
    /// constraint or the node touches the obstacle.
    pub action: Option<Vec3>,
    /// Constraint at the node, absent for in-obstacle nodes.
    pub constraint: Option<BarrierConstraint>,
}

impl ActionCell {
    pub fn is_unsafe(&self) -> bool {
        self.action.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionMap {
    pub plane: Plane,
    pub speed: f64,
    /// Row-major over the two in-plane axes (first axis fastest).
    pub cells: Vec<ActionCell>,
}

impl ActionMap {
    pub fn unsafe_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_unsafe()).count()
    }
}

pub fn safest_action_field(
    field: &DistanceField,
    params: &SafetyParams,
    speed: f64,
    plane: Plane,
    angular_samples: usize,
) -> Result<ActionMap> {
    if !(speed.is_finite() && speed >= 0.0 && speed <= params.alpha) {
        return Err(Error::InvalidArgument(format!(
            "speed {speed} must lie in [0, alpha = {}]",
            params.alpha
        )));
    }
    if angular_samples == 0 {
        return Err(Error::InvalidArgument(
            "need at least one angular sample".into(),
        ));
    }
    let spec = field.spec();
    let ([u_axis, v_axis], fixed) = plane.axes();
    let lo = spec.origin()[fixed];
    let hi = spec.max_corner()[fixed];
    if !(plane.offset >= lo - 1e-9 && plane.offset <= hi + 1e-9) {
        let mut q = Vec3::zeros();
        q[fixed] = plane.offset;
        return Err(Error::OutOfBounds {
            x: q.x,
            y: q.y,
            z: q.z,
        });
    }

    let actions: Vec<Vec3> = (0..angular_samples)
        .map(|k| plane.direction(TAU * k as f64 / angular_samples as f64) * speed)
        .collect();
    let dims = spec.dims();
    let (nu, nv) = (dims[u_axis], dims[v_axis]);

    let cells = (0..nu * nv)
        .into_par_iter()
        .map(|idx| {
            let (iu, iv) = (idx % nu, idx / nu);
            let mut q = Vec3::zeros();
            q[u_axis] = spec.origin()[u_axis] + iu as f64 * spec.resolution();
            q[v_axis] = spec.origin()[v_axis] + iv as f64 * spec.resolution();
            q[fixed] = plane.offset;
            match field.sample(&q) {
                Ok(s) => {
                    let ev = BarrierEval::new(s.d, s.grad, params.radius);
                    let c = assemble_constraint(&ev, params);
                    let best = actions
                        .iter()
                        .map(|u| (c.margin(u), *u))
                        .filter(|(m, _)| *m >= 0.0)
                        .fold(None, |acc: Option<(f64, Vec3)>, cand| match acc {
                            Some(best) if best.0 >= cand.0 => Some(best),
                            _ => Some(cand),
                        });
                    ActionCell {
                        position: q,
                        action: best.map(|(_, u)| u),
                        constraint: Some(c),
                    }
                }
                Err(Error::InObstacle { .. }) => ActionCell {
                    position: q,
                    action: None,
                    constraint: None,
                },
                Err(e) => unreachable!("in-plane node outside grid: {e}"),
            }
        })
        .collect();
    Ok(ActionMap {
        plane,
        speed,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_field, inflate_field, GridSpec};
    use crate::geometry::GateGeometry;

    fn fields() -> (DistanceField, DistanceField) {
        let spec =
            GridSpec::from_extent(Vec3::new(-2.0, -2.0, -2.0), Vec3::new(2.0, 2.0, 2.0), 0.1)
                .unwrap();
        let f = build_field(&GateGeometry::default(), &spec, 0.6).unwrap();
        let inf = inflate_field(&f, &Vec3::repeat(0.2)).unwrap();
        (f, inf)
    }

    fn noiseless() -> SafetyParams {
        SafetyParams {
            dw: Vec3::zeros(),
            ..Default::default()
        }
    }

    #[test]
    fn far_cells_point_along_gradient() {
        let (f, _) = fields();
        let p = noiseless();
        let plane = Plane {
            axis: PlaneAxis::Xy,
            offset: 0.0,
        };
        let map = safest_action_field(&f, &p, 1.0, plane, 360).unwrap();
        // Node (-1.8, 0, 0): well clear of the frame, h >> 0.
        let cell = map
            .cells
            .iter()
            .find(|c| (c.position - Vec3::new(-1.8, 0.0, 0.0)).norm() < 1e-6)
            .unwrap();
        let u = cell.action.unwrap();
        let g = f.sample(&cell.position).unwrap().grad;
        let g_plane = Vec3::new(g.x, g.y, 0.0).normalize();
        assert!(u.normalize().dot(&g_plane) > 0.9998);
    }

    #[test]
    fn deep_between_inflated_bars_is_unsafe() {
        let (_, inf) = fields();
        let p = noiseless();
        let plane = Plane {
            axis: PlaneAxis::Yz,
            offset: 0.0,
        };
        let map = safest_action_field(&inf, &p, 1.0, plane, 72).unwrap();
        // The inflated frame swallows the rim of the opening.
        let cell = map
            .cells
            .iter()
            .find(|c| (c.position - Vec3::new(0.0, 0.6, 0.0)).norm() < 1e-6)
            .unwrap();
        assert!(cell.is_unsafe());
        if let Some(c) = cell.constraint {
            let s = inf.sample(&cell.position).unwrap();
            assert!(s.d < p.radius);
            for k in 0..72 {
                let u = plane.direction(TAU * k as f64 / 72.0);
                assert!(c.margin(&u) < 0.0);
            }
        }
    }

    #[test]
    fn inflation_adds_unsafe_cells() {
        let (f, inf) = fields();
        let p = SafetyParams::default();
        for axis in [PlaneAxis::Xy, PlaneAxis::Yz] {
            let plane = Plane { axis, offset: 0.0 };
            let a = safest_action_field(&f, &p, 1.0, plane, 72).unwrap();
            let b = safest_action_field(&inf, &p, 1.0, plane, 72).unwrap();
            for (x, y) in a.cells.iter().zip(&b.cells) {
                if x.is_unsafe() {
                    assert!(y.is_unsafe(), "{:?}", x.position);
                }
            }
            assert!(b.unsafe_count() > a.unsafe_count());
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let (f, _) = fields();
        let p = SafetyParams::default();
        let plane = Plane {
            axis: PlaneAxis::Xy,
            offset: 5.0,
        };
        assert!(matches!(
            safest_action_field(&f, &p, 1.0, plane, 8),
            Err(Error::OutOfBounds { .. })
        ));
        let plane = Plane {
            axis: PlaneAxis::Xy,
            offset: 0.0,
        };
        assert!(safest_action_field(&f, &p, 4.0, plane, 8).is_err());
        assert!(safest_action_field(&f, &p, 1.0, plane, 0).is_err());
        assert!("zx".parse::<PlaneAxis>().is_err());
    }
}
