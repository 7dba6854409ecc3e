//! Minimal-deviation safety filter.
//!
//! Projects a nominal action onto `{u : a.u >= b} ∩ {|u| <= alpha}`. The
//! feasible set is a ball cut by a half-space, so the projection has a closed
//! form in each of its active-set cases and no iterative solver is needed.

mod action_map;

pub use action_map::{safest_action_field, ActionCell, ActionMap, Plane, PlaneAxis};

use crate::barrier::{BarrierConstraint, SafetyParams, ADMISSIBLE_TOL};
use crate::geometry::Vec3;

/// Tolerance of the optimality certificate.
pub const KKT_TOL: f64 = 1e-7;

const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterStatus {
    Unchanged,
    Projected,
    InfeasibleFallback,
    DegenerateSafe,
}

impl FilterStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterStatus::Unchanged => "unchanged",
            FilterStatus::Projected => "projected",
            FilterStatus::InfeasibleFallback => "infeasible_fallback",
            FilterStatus::DegenerateSafe => "degenerate_safe",
        }
    }
}

impl std::fmt::Display for FilterStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterDecision {
    pub u_star: Vec3,
    pub status: FilterStatus,
    /// `a . u_star - b`.
    pub margin: f64,
    /// `|u_tilde - u_star|`.
    pub deviation: f64,
    /// Set when `a = 0` and `b > 0`: no action can improve the margin.
    pub no_improving_direction: bool,
}

impl FilterDecision {
    fn new(u_tilde: &Vec3, u_star: Vec3, status: FilterStatus, c: &BarrierConstraint) -> Self {
        Self {
            u_star,
            status,
            margin: c.margin(&u_star),
            deviation: (u_tilde - u_star).norm(),
            no_improving_direction: false,
        }
    }
}

fn clip_to_ball(u: &Vec3, alpha: f64) -> Vec3 {
    let n = u.norm();
    if n > alpha {
        u * (alpha / n)
    } else {
        *u
    }
}

/// Unit vector orthogonal to `a`, chosen deterministically.
fn any_orthogonal(a: &Vec3) -> Vec3 {
    let abs = a.abs();
    let axis = if abs.x <= abs.y && abs.x <= abs.z {
        Vec3::x()
    } else if abs.y <= abs.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    a.cross(&axis).normalize()
}

pub fn filter_action(
    u_tilde: &Vec3,
    c: &BarrierConstraint,
    params: &SafetyParams,
) -> FilterDecision {
    let alpha = params.alpha;
    let a = c.a;
    let b = c.b;
    let a_sq = a.norm_squared();
    let a_norm = a_sq.sqrt();

    if a_norm <= DEGENERATE_NORM {
        if b <= 0.0 {
            return FilterDecision::new(
                u_tilde,
                clip_to_ball(u_tilde, alpha),
                FilterStatus::DegenerateSafe,
                c,
            );
        }
        let mut dec =
            FilterDecision::new(u_tilde, Vec3::zeros(), FilterStatus::InfeasibleFallback, c);
        dec.no_improving_direction = true;
        return dec;
    }

    if alpha * a_norm < b {
        let u = a * (alpha / a_norm);
        return FilterDecision::new(u_tilde, u, FilterStatus::InfeasibleFallback, c);
    }

    let in_ball = u_tilde.norm() <= alpha + ADMISSIBLE_TOL;
    if in_ball && c.margin(u_tilde) >= -ADMISSIBLE_TOL {
        return FilterDecision::new(u_tilde, *u_tilde, FilterStatus::Unchanged, c);
    }

    // Ball projection alone.
    if !in_ball {
        let clipped = clip_to_ball(u_tilde, alpha);
        if c.margin(&clipped) >= -ADMISSIBLE_TOL {
            return FilterDecision::new(u_tilde, clipped, FilterStatus::Projected, c);
        }
    }

    // Half-space projection alone.
    let shift = (b - a.dot(u_tilde)) / a_sq;
    let u_half = u_tilde + a * shift;
    if u_half.norm() <= alpha {
        return FilterDecision::new(u_tilde, u_half, FilterStatus::Projected, c);
    }

    // Both active: nearest point of the circle where the plane a.u = b cuts
    // the sphere |u| = alpha.
    let center = a * (b / a_sq);
    let radius = (alpha * alpha - center.norm_squared()).max(0.0).sqrt();
    let perp = u_tilde - a * (a.dot(u_tilde) / a_sq);
    let dir = if perp.norm() > DEGENERATE_NORM {
        perp.normalize()
    } else {
        any_orthogonal(&a)
    };
    FilterDecision::new(u_tilde, center + dir * radius, FilterStatus::Projected, c)
}

/// Lagrange multipliers certifying optimality of a filter decision.
///
/// `lambda` belongs to the barrier constraint and `mu` to `(|u|^2 - alpha^2)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktCertificate {
    pub lambda: f64,
    pub mu: f64,
    pub residual: f64,
}

/// Search for non-negative multipliers satisfying stationarity
/// `u_tilde - u* = mu u* - lambda a` with complementary slackness.
///
/// With only two constraints, enumerating the active subsets solves the
/// non-negative least-squares problem exactly.
pub fn kkt_certificate(
    u_tilde: &Vec3,
    c: &BarrierConstraint,
    params: &SafetyParams,
    u_star: &Vec3,
) -> Option<KktCertificate> {
    let scale = 1.0 + u_tilde.norm() + c.a.norm() * params.alpha + c.b.abs();
    let tol = KKT_TOL * scale;
    let margin = c.margin(u_star);
    let norm_gap = u_star.norm() - params.alpha;
    if margin < -tol || norm_gap > KKT_TOL * (1.0 + params.alpha) {
        return None;
    }
    let barrier_active = margin <= tol;
    let ball_active = norm_gap.abs() <= KKT_TOL * (1.0 + params.alpha);

    let target = u_tilde - u_star;
    let col_l = -c.a;
    let col_m = *u_star;
    let residual = |l: f64, m: f64| (target - col_l * l - col_m * m).norm();

    let mut candidates = vec![(0.0, 0.0)];
    let single = |col: &Vec3| {
        let n = col.norm_squared();
        (n > 0.0).then(|| (target.dot(col) / n).max(0.0))
    };
    if barrier_active {
        if let Some(l) = single(&col_l) {
            candidates.push((l, 0.0));
        }
    }
    if ball_active {
        if let Some(m) = single(&col_m) {
            candidates.push((0.0, m));
        }
    }
    if barrier_active && ball_active {
        let (g11, g12, g22) = (col_l.dot(&col_l), col_l.dot(&col_m), col_m.dot(&col_m));
        let det = g11 * g22 - g12 * g12;
        if det > 1e-14 * g11 * g22 {
            let (r1, r2) = (target.dot(&col_l), target.dot(&col_m));
            let l = (g22 * r1 - g12 * r2) / det;
            let m = (g11 * r2 - g12 * r1) / det;
            if l >= -tol && m >= -tol {
                candidates.push((l.max(0.0), m.max(0.0)));
            }
        }
    }
    candidates
        .into_iter()
        .map(|(lambda, mu)| KktCertificate {
            lambda,
            mu,
            residual: residual(lambda, mu),
        })
        .filter(|k| k.residual <= tol)
        .min_by(|x, y| x.residual.total_cmp(&y.residual))
}

pub fn verify_kkt(
    u_tilde: &Vec3,
    c: &BarrierConstraint,
    params: &SafetyParams,
    decision: &FilterDecision,
) -> bool {
    match decision.status {
        FilterStatus::InfeasibleFallback => false,
        _ => kkt_certificate(u_tilde, c, params, &decision.u_star).is_some(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::admissible;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64) -> SafetyParams {
        SafetyParams {
            alpha,
            ..Default::default()
        }
    }

    fn constraint(a: Vec3, b: f64, alpha: f64) -> BarrierConstraint {
        BarrierConstraint::new(a, b, alpha)
    }

    #[test]
    fn unchanged_example() {
        let p = params(3.0);
        let c = constraint(Vec3::new(4.0, 0.0, 0.0), -5.6, 3.0);
        let u = Vec3::new(1.0, 0.0, 0.0);
        let d = filter_action(&u, &c, &p);
        assert_eq!(d.status, FilterStatus::Unchanged);
        assert_eq!(d.u_star, u);
        let k = kkt_certificate(&u, &c, &p, &d.u_star).unwrap();
        assert_eq!((k.lambda, k.mu), (0.0, 0.0));
    }

    #[test]
    fn halfspace_projection_example() {
        let p = params(3.0);
        let c = constraint(Vec3::new(4.0, 0.0, 0.0), -5.6, 3.0);
        let u = Vec3::new(-3.0, 0.0, 0.0);
        let d = filter_action(&u, &c, &p);
        assert_eq!(d.status, FilterStatus::Projected);
        assert!((d.u_star - Vec3::new(-1.4, 0.0, 0.0)).norm() < 1e-12);
        assert!((d.deviation - 1.6).abs() < 1e-12);
        let k = kkt_certificate(&u, &c, &p, &d.u_star).unwrap();
        assert!((k.lambda - (c.b - c.a.dot(&u)) / c.a.norm_squared()).abs() < 1e-12);
        assert_eq!(k.mu, 0.0);

        // Dense sampling of the feasible set finds nothing closer.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = 0;
        while seen < 1_000_000 {
            let v = Vec3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            if !admissible(&v, &c, &p) {
                continue;
            }
            seen += 1;
            assert!((v - u).norm() >= d.deviation - 1e-12);
        }
    }

    #[test]
    fn infeasible_example() {
        let p = params(3.0);
        let c = constraint(Vec3::new(1.0, 0.0, 0.0), 5.0, 3.0);
        assert!(!c.feasible_direction_exists);
        let d = filter_action(&Vec3::new(0.0, 1.0, 0.0), &c, &p);
        assert_eq!(d.status, FilterStatus::InfeasibleFallback);
        assert!((d.u_star - Vec3::new(3.0, 0.0, 0.0)).norm() < 1e-12);
        assert!(d.margin < 0.0);
        assert!(!d.no_improving_direction);
    }

    #[test]
    fn degenerate_constraints() {
        let p = params(3.0);
        let c = constraint(Vec3::zeros(), -1.0, 3.0);
        let d = filter_action(&Vec3::new(4.0, 0.0, 0.0), &c, &p);
        assert_eq!(d.status, FilterStatus::DegenerateSafe);
        assert!((d.u_star - Vec3::new(3.0, 0.0, 0.0)).norm() < 1e-12);
        assert!(verify_kkt(&Vec3::new(4.0, 0.0, 0.0), &c, &p, &d));

        let c = constraint(Vec3::zeros(), 0.5, 3.0);
        let d = filter_action(&Vec3::new(1.0, 0.0, 0.0), &c, &p);
        assert_eq!(d.status, FilterStatus::InfeasibleFallback);
        assert_eq!(d.u_star, Vec3::zeros());
        assert!(d.no_improving_direction);
    }

    #[test]
    fn oversized_input_is_clipped() {
        let p = params(3.0);
        let c = constraint(Vec3::new(1.0, 0.0, 0.0), -10.0, 3.0);
        let d = filter_action(&Vec3::new(0.0, 6.0, 0.0), &c, &p);
        assert_eq!(d.status, FilterStatus::Projected);
        assert!((d.u_star - Vec3::new(0.0, 3.0, 0.0)).norm() < 1e-12);
        assert!(verify_kkt(&Vec3::new(0.0, 6.0, 0.0), &c, &p, &d));
    }

    #[test]
    fn both_constraints_active() {
        let p = params(1.0);
        // Plane x = 0.6 cuts the unit sphere in a circle of radius 0.8.
        let c = constraint(Vec3::new(1.0, 0.0, 0.0), 0.6, 1.0);
        let u = Vec3::new(-1.0, 2.0, 0.0);
        let d = filter_action(&u, &c, &p);
        assert_eq!(d.status, FilterStatus::Projected);
        assert!((d.u_star - Vec3::new(0.6, 0.8, 0.0)).norm() < 1e-12);
        let k = kkt_certificate(&u, &c, &p, &d.u_star).unwrap();
        assert!(k.lambda > 0.0 && k.mu > 0.0);

        // Anti-parallel to a: the half-space projection already lies in the ball.
        let u = Vec3::new(-2.0, 0.0, 0.0);
        let d = filter_action(&u, &c, &p);
        assert!((d.u_star - Vec3::new(0.6, 0.0, 0.0)).norm() < 1e-12);
        assert!(verify_kkt(&u, &c, &p, &d));
    }

    #[test]
    fn kkt_rejects_suboptimal_points() {
        let p = params(3.0);
        let c = constraint(Vec3::new(4.0, 0.0, 0.0), -5.6, 3.0);
        let u = Vec3::new(-3.0, 0.0, 0.0);
        let mut d = filter_action(&u, &c, &p);
        d.u_star = Vec3::new(-1.4, 0.3, 0.0);
        assert!(!verify_kkt(&u, &c, &p, &d));
        d.u_star = Vec3::new(-1.0, 0.0, 0.0);
        assert!(!verify_kkt(&u, &c, &p, &d));
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (Vec3, BarrierConstraint, SafetyParams) {
        let alpha = rng.random_range(0.2..4.0);
        let a = Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0));
        let b = rng.random_range(-1.2..1.2) * alpha * a.norm();
        let u = Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0) * alpha);
        (u, constraint(a, b, alpha), params(alpha))
    }

    #[test]
    fn fuzz_safety_idempotence_and_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20_000 {
            let (u, c, p) = random_instance(&mut rng);
            let d = filter_action(&u, &c, &p);
            assert!(d.u_star.norm() <= p.alpha + 1e-9);
            if d.status == FilterStatus::InfeasibleFallback {
                assert!(!c.feasible_direction_exists);
                assert!(d.margin < 0.0);
                continue;
            }
            assert!(admissible(&d.u_star, &c, &p));
            assert!(verify_kkt(&u, &c, &p, &d), "{u:?} {c:?} {d:?}");
            let again = filter_action(&d.u_star, &c, &p);
            assert_eq!(again.status, FilterStatus::Unchanged);
            if d.status == FilterStatus::Projected {
                assert!(d.margin.abs() <= 1e-9 || (d.u_star.norm() - p.alpha).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn projection_is_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..5_000 {
            let (u1, c, p) = random_instance(&mut rng);
            if !c.feasible_direction_exists {
                continue;
            }
            let u2 = u1 + Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5));
            let d1 = filter_action(&u1, &c, &p);
            let d2 = filter_action(&u2, &c, &p);
            assert!((d1.u_star - d2.u_star).norm() <= (u1 - u2).norm() + 1e-6);
        }
    }
}
