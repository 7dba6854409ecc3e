//! Barrier function `h = d^2 - R^2` and the linear action constraint it
//! induces under single-integrator dynamics with box-bounded process noise.

use crate::error::{Error, Result};
use crate::field::DistanceField;
use crate::geometry::Vec3;

/// Slack on constraint and norm checks.
pub const ADMISSIBLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    /// Buffer safety radius (m).
    pub radius: f64,
    /// Class-K gain, `kappa(h) = gamma * h` (1/s).
    pub gamma: f64,
    /// Action norm bound (m/s).
    pub alpha: f64,
    /// Process-noise support per axis (m/s).
    pub dw: Vec3,
    /// Observation-noise support per axis (m).
    pub dv: Vec3,
}

impl Default for SafetyParams {
    fn default() -> Self {
        Self {
            radius: 0.35,
            gamma: 4.0,
            alpha: 3.0,
            dw: Vec3::repeat(0.1),
            dv: Vec3::repeat(0.2),
        }
    }
}

impl SafetyParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        positive("R", self.radius)?;
        positive("gamma", self.gamma)?;
        positive("alpha", self.alpha)?;
        for (name, v) in [("dw", self.dw), ("dv", self.dv)] {
            if !v.iter().all(|c| c.is_finite() && *c >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be non-negative per axis"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEval {
    pub d: f64,
    pub grad: Vec3,
    pub h: f64,
}

impl BarrierEval {
    pub fn new(d: f64, grad: Vec3, radius: f64) -> Self {
        Self {
            d,
            grad,
            h: d * d - radius * radius,
        }
    }
}

/// Half-space `a . u >= b` over actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConstraint {
    pub a: Vec3,
    pub b: f64,
    /// Whether some action with `|u| <= alpha` meets the constraint.
    pub feasible_direction_exists: bool,
}

impl BarrierConstraint {
    pub fn new(a: Vec3, b: f64, alpha: f64) -> Self {
        Self {
            a,
            b,
            feasible_direction_exists: alpha * a.norm() >= b,
        }
    }

    pub fn margin(&self, u: &Vec3) -> f64 {
        self.a.dot(u) - self.b
    }

    /// Same constraint expressed in a rotated frame (`a' = rot * a`).
    pub fn rotated(&self, rot: &nalgebra::Rotation3<f64>) -> Self {
        Self {
            a: rot * self.a,
            ..*self
        }
    }
}

pub fn eval_barrier(field: &DistanceField, q: &Vec3, params: &SafetyParams) -> Result<BarrierEval> {
    let s = field.sample(q)?;
    Ok(BarrierEval::new(s.d, s.grad, params.radius))
}

/// Linear constraint guaranteeing `2 d grad.(u + w) + gamma h >= 0` for every
/// `|w_k| <= dw_k`.
pub fn assemble_constraint(ev: &BarrierEval, params: &SafetyParams) -> BarrierConstraint {
    let a = 2.0 * ev.d * ev.grad;
    let c = robustification(ev, &params.dw);
    let b = -params.gamma * ev.h + c;
    BarrierConstraint::new(a, b, params.alpha)
}

/// Worst case of `-2 d grad.w` over the noise box.
pub fn robustification(ev: &BarrierEval, dw: &Vec3) -> f64 {
    2.0 * ev.d * ev.grad.abs().dot(dw)
}

pub fn admissible(u: &Vec3, c: &BarrierConstraint, params: &SafetyParams) -> bool {
    c.margin(u) >= -ADMISSIBLE_TOL && u.norm() <= params.alpha + ADMISSIBLE_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(gamma: f64, radius: f64, dw: f64, alpha: f64) -> SafetyParams {
        SafetyParams {
            radius,
            gamma,
            alpha,
            dw: Vec3::repeat(dw),
            dv: Vec3::zeros(),
        }
    }

    #[test]
    fn barrier_values() {
        assert_eq!(BarrierEval::new(0.5, Vec3::x(), 0.5).h, 0.0);
        assert_eq!(BarrierEval::new(2.0, Vec3::x(), 0.5).h, 3.75);
    }

    #[test]
    fn constraint_worked_example() {
        let p = params(2.0, 1.0, 0.1, 3.0);
        let ev = BarrierEval::new(2.0, Vec3::x(), p.radius);
        let c = assemble_constraint(&ev, &p);
        assert_eq!(c.a, Vec3::new(4.0, 0.0, 0.0));
        assert!((robustification(&ev, &p.dw) - 0.4).abs() < 1e-12);
        assert!((c.b + 5.6).abs() < 1e-12);
        assert!(c.feasible_direction_exists);

        // Every boundary action survives every admissible disturbance.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = Vec3::new(c.b / 4.0, 0.7, -1.1);
        for _ in 0..10_000 {
            let w = Vec3::from_fn(|_, _| rng.random_range(-0.1..=0.1));
            let lhs = 2.0 * ev.d * ev.grad.dot(&(u + w)) + p.gamma * ev.h;
            assert!(lhs >= -1e-12);
        }
        // The extreme disturbance drives it exactly to zero.
        let w = Vec3::new(-0.1, 0.0, 0.0);
        let lhs = 2.0 * ev.d * ev.grad.dot(&(u + w)) + p.gamma * ev.h;
        assert!(lhs.abs() < 1e-12);
    }

    #[test]
    fn noiseless_constraint() {
        let p = params(3.0, 0.6, 0.0, 3.0);
        let ev = BarrierEval::new(1.3, Vec3::new(0.6, 0.0, 0.8), p.radius);
        let c = assemble_constraint(&ev, &p);
        assert_eq!(c.b, -p.gamma * ev.h);
    }

    #[test]
    fn medial_axis_constraint_is_vacuous() {
        let p = params(4.0, 0.6, 0.1, 3.0);
        let ev = BarrierEval::new(1.0, Vec3::zeros(), p.radius);
        let c = assemble_constraint(&ev, &p);
        assert_eq!(c.a, Vec3::zeros());
        assert!(c.b < 0.0);
        assert!(c.feasible_direction_exists);
        assert!(admissible(&Vec3::new(-3.0, 0.0, 0.0), &c, &p));
    }

    #[test]
    fn admissibility_examples() {
        let p = params(2.0, 1.0, 0.1, 3.0);
        let c = BarrierConstraint::new(Vec3::new(4.0, 0.0, 0.0), -5.6, p.alpha);
        assert!(admissible(&Vec3::new(1.0, 0.0, 0.0), &c, &p));
        assert!(!admissible(&Vec3::new(-2.0, 0.0, 0.0), &c, &p));
        assert!(!admissible(&Vec3::new(3.1, 0.0, 0.0), &c, &p));
    }

    #[test]
    fn gamma_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let d = rng.random_range(0.6..4.0);
            let grad = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let lo = params(rng.random_range(0.1..5.0), 0.6, 0.1, 3.0);
            let hi = SafetyParams {
                gamma: lo.gamma + rng.random_range(0.0..5.0),
                ..lo
            };
            let ev = BarrierEval::new(d, grad, 0.6);
            assert!(ev.h >= 0.0);
            assert!(assemble_constraint(&ev, &hi).b <= assemble_constraint(&ev, &lo).b);
        }
    }

    #[test]
    fn validation() {
        assert!(SafetyParams::default().validate().is_ok());
        let bad = SafetyParams {
            gamma: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SafetyParams {
            dw: Vec3::new(0.1, -0.1, 0.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
