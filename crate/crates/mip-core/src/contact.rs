//! Analytical wheel-ground contact force estimation for the reduced model.
//!
//! The reduced dynamics assume the wheel rolls without slip, which is only
//! valid while the ground can actually supply the implied reaction. This
//! module recovers that reaction: given a state and input it computes the
//! accelerations the reduced model predicts, then solves the per-body
//! Newton-Euler balance of the wheel and the body for the axle force `c`
//! and the ground force components `(f_gx, f_gn)` expressed along the slope
//! tangent and normal. `noslip_constraints` turns the result into the two
//! inequality values the predictive controller keeps negative: contact must
//! press on the ground and the friction demand must stay inside the cone.
//!
//! The 4x4 balance loses rank when the body center of mass sits exactly on
//! the contact normal (pitch equal to the slope angle for an upright body
//! offset). The force limit there is finite and smooth; it is recovered by
//! solving at pitches nudged to either side and averaging, with a
//! second-order correction so the nudge bias stays far below the solver
//! tolerances.

use crate::dynamics::{
    generalized_accel, motor_torque, thrust_dir, ControlInput, RobotParams, State,
};
use crate::math::{rotate, Lu4, Vec2};

/// Pitch offset used when solving next to the singular pose (rad).
pub const SINGULAR_NUDGE: f64 = 1e-3;
/// Half-width of the pitch band around the singular pose inside which the
/// nudged average is used instead of the direct solve (rad).
pub const SINGULAR_BAND: f64 = 1e-4;
/// Condition-number limit beyond which a direct solve is not trusted.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Forces sustaining the no-slip motion: `c` is the axle force the body
/// exerts on the wheel (inertial frame, N); `f_gx` and `f_gn` are the
/// ground force on the wheel along the slope tangent (uphill positive) and
/// the outward slope normal (N).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactForces {
    pub c: Vec2,
    pub f_gx: f64,
    pub f_gn: f64,
}

impl ContactForces {
    /// Ground force in the inertial frame.
    pub fn ground_force(&self, p: &RobotParams) -> Vec2 {
        p.slope_dir().scale(self.f_gx) + p.slope_normal().scale(self.f_gn)
    }
}

/// Values of the two no-slip feasibility functions; motion is consistent
/// with rolling while both are negative.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConstraintValues {
    /// Negated normal force: contact holds while `h1 = -f_gn < 0`.
    pub h1: f64,
    /// Friction-cone excess: `h2 = f_gx^2 - (mu_s f_gn)^2 < 0`.
    pub h2: f64,
}

impl ConstraintValues {
    #[inline]
    pub fn to_array(self) -> [f64; 2] {
        [self.h1, self.h2]
    }

    #[inline]
    pub fn feasible(&self) -> bool {
        self.h1 < 0.0 && self.h2 < 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactError {
    /// The balance is singular at the requested pose and remains singular
    /// at the nudged pitches; no meaningful force estimate exists.
    UnresolvableSingularity,
}

impl core::fmt::Display for ContactError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ContactError::UnresolvableSingularity => {
                write!(f, "contact force balance singular even at nudged pitches")
            }
        }
    }
}

/// Moment of a unit thrust force about the body center of mass (m). The
/// thruster sits at `l_t` and the force tilts with the body, so the arm
/// depends on pitch.
#[inline]
pub fn thrust_moment_about_com(theta: f64, p: &RobotParams) -> f64 {
    rotate(theta, p.l_t - p.l_b).cross(thrust_dir(theta))
}

/// Assembles the linear system `A z = b` in the unknowns
/// `z = [c_x, c_y, f_gx, f_gn]`.
///
/// Rows are the wheel translational balance (2), the wheel spin balance and
/// the body pitch balance about its center of mass, all evaluated with the
/// accelerations of the reduced no-slip model. No singularity handling is
/// done here; `solve_contact_forces` is the robust entry point.
pub fn contact_system(
    x: &State,
    u: &ControlInput,
    p: &RobotParams,
) -> ([[f64; 4]; 4], [f64; 4]) {
    let qdd = generalized_accel(x, u, p);
    let tau = motor_torque(u.u_m, x.phi_dot, p);
    let e = p.slope_dir();
    let n = p.slope_normal();

    // Wheel center accelerates along the slope under rolling.
    let a_w = e.scale(qdd[0] * p.r);

    // Axle-to-body-com offset seen from the body: p_w - p_b.
    let a = -rotate(x.theta, p.l_b);

    let m_t = thrust_moment_about_com(x.theta, p);

    let mat = [
        [1.0, 0.0, e.x, n.x],
        [0.0, 1.0, e.y, n.y],
        [0.0, 0.0, p.r, 0.0],
        [-a.y, a.x, 0.0, 0.0],
    ];
    let rhs = [
        p.m_w * a_w.x,
        p.m_w * (a_w.y + p.g),
        tau - p.i_w * qdd[0],
        -p.i_b * qdd[1] - tau + m_t * u.f_t,
    ];
    (mat, rhs)
}

fn solve_direct(x: &State, u: &ControlInput, p: &RobotParams) -> Option<ContactForces> {
    let (mat, rhs) = contact_system(x, u, p);
    let lu = Lu4::new(&mat);
    if lu.is_singular() || lu.cond1() > CONDITION_LIMIT {
        return None;
    }
    let z = lu.solve(rhs)?;
    Some(ContactForces {
        c: Vec2::new(z[0], z[1]),
        f_gx: z[2],
        f_gn: z[3],
    })
}

fn mean(a: ContactForces, b: ContactForces) -> ContactForces {
    ContactForces {
        c: (a.c + b.c).scale(0.5),
        f_gx: 0.5 * (a.f_gx + b.f_gx),
        f_gn: 0.5 * (a.f_gn + b.f_gn),
    }
}

fn combine(fine: ContactForces, coarse: ContactForces) -> ContactForces {
    // Richardson step: the nudge bias of the symmetric average is even in
    // the nudge size, so (4 m(d) - m(2d)) / 3 cancels the leading term.
    ContactForces {
        c: (fine.c.scale(4.0) - coarse.c).scale(1.0 / 3.0),
        f_gx: (4.0 * fine.f_gx - coarse.f_gx) / 3.0,
        f_gn: (4.0 * fine.f_gn - coarse.f_gn) / 3.0,
    }
}

fn solve_nudged(x: &State, u: &ControlInput, p: &RobotParams) -> Result<ContactForces, ContactError> {
    let at = |dtheta: f64| {
        let mut xs = *x;
        xs.theta += dtheta;
        solve_direct(&xs, u, p)
    };
    let (hi, lo) = match (at(SINGULAR_NUDGE), at(-SINGULAR_NUDGE)) {
        (Some(hi), Some(lo)) => (hi, lo),
        _ => return Err(ContactError::UnresolvableSingularity),
    };
    let fine = mean(hi, lo);
    match (at(2.0 * SINGULAR_NUDGE), at(-2.0 * SINGULAR_NUDGE)) {
        (Some(hi2), Some(lo2)) => Ok(combine(fine, mean(hi2, lo2))),
        _ => Ok(fine),
    }
}

/// Contact forces sustaining the no-slip motion at `(x, u)`.
///
/// Away from the singular pose this is a single well-conditioned 4x4 solve.
/// Within [`SINGULAR_BAND`] of `theta = beta`, or whenever the direct
/// system is too ill-conditioned, the result is the corrected average of
/// solves at pitches nudged by [`SINGULAR_NUDGE`], which matches the smooth
/// limit through the singular pose.
pub fn solve_contact_forces(
    x: &State,
    u: &ControlInput,
    p: &RobotParams,
) -> Result<ContactForces, ContactError> {
    if (x.theta - p.beta).abs() < SINGULAR_BAND {
        return solve_nudged(x, u, p);
    }
    match solve_direct(x, u, p) {
        Some(f) => Ok(f),
        None => solve_nudged(x, u, p),
    }
}

/// Feasibility values of the rolling contact for already-computed forces.
pub fn noslip_constraints(f: &ContactForces, p: &RobotParams) -> ConstraintValues {
    ConstraintValues {
        h1: -f.f_gn,
        h2: f.f_gx * f.f_gx - (p.mu_s * f.f_gn) * (p.mu_s * f.f_gn),
    }
}

/// Convenience: solve the forces and evaluate the constraints in one call.
pub fn constraint_values(
    x: &State,
    u: &ControlInput,
    p: &RobotParams,
) -> Result<ConstraintValues, ContactError> {
    Ok(noslip_constraints(&solve_contact_forces(x, u, p)?, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    // With `std` linked (tests), inherent f64 methods shadow this shim.
    #[allow(unused_imports)]
    use crate::math::FloatExt;

    fn params(beta: f64) -> RobotParams {
        let p = RobotParams {
            beta,
            ..RobotParams::default()
        };
        p.validate().unwrap();
        p
    }

    #[test]
    fn flat_static_supports_full_weight() {
        let p = params(0.0);
        // Upright at rest is exactly the singular pose; the nudged average
        // must still recover plain statics.
        let f = solve_contact_forces(&State::default(), &ControlInput::ZERO, &p).unwrap();
        let weight = p.total_mass() * p.g;
        assert!(f.f_gx.abs() < 1e-9 * weight, "f_gx = {}", f.f_gx);
        assert!(
            (f.f_gn - weight).abs() < 1e-9 * weight,
            "f_gn = {} vs {}",
            f.f_gn,
            weight
        );
        let h = noslip_constraints(&f, &p);
        assert!(h.feasible());
    }

    /// Equilibrium pitch and duty for a static hold with a given thrust,
    /// from statics written out independently of the dynamics module.
    fn static_hold(p: &RobotParams, f_t: f64) -> (f64, f64) {
        let m = p.total_mass();
        let residual = |theta: f64| {
            let h_phi = m * p.g * p.r * p.beta.sin();
            let h_theta = p.m_b * p.g * (p.l_b.x * theta.cos() - p.l_b.y * theta.sin());
            let bt0 = p.r * (p.beta + theta).cos();
            let bt1 = -p.l_t.x * (2.0 * theta).sin() - p.l_t.y * (2.0 * theta).cos();
            // Sum of both balance rows with the motor torque eliminated.
            h_theta + h_phi - bt0 * f_t - bt1 * f_t
        };
        let (mut lo, mut hi) = (-0.2, 1.2);
        assert!(residual(lo) * residual(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(lo) * residual(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let bt0 = p.r * (p.beta + theta).cos();
        let u_m = (m * p.g * p.r * p.beta.sin() - bt0 * f_t) / p.k1;
        (theta, u_m)
    }

    #[test]
    fn incline_static_hold_matches_plane_statics() {
        let p = params(15f64.to_radians());
        for f_t in [0.0, 5.0] {
            let (theta, u_m) = static_hold(&p, f_t);
            let x = State::new(0.0, theta, 0.0, 0.0);
            let u = ControlInput::new(u_m, f_t);
            let qdd = generalized_accel(&x, &u, &p);
            assert!(qdd[0].abs() < 1e-9 && qdd[1].abs() < 1e-9, "{qdd:?}");

            let f = solve_contact_forces(&x, &u, &p).unwrap();
            let m = p.total_mass();
            // Whole-robot statics: the ground carries weight minus thrust.
            let expect_gx = m * p.g * p.beta.sin() - f_t * (p.beta + theta).cos();
            let expect_gn = m * p.g * p.beta.cos() + f_t * (p.beta + theta).sin();
            assert!(
                (f.f_gx - expect_gx).abs() < 1e-8 * expect_gn,
                "f_t = {f_t}: f_gx = {} vs {expect_gx}",
                f.f_gx
            );
            assert!(
                (f.f_gn - expect_gn).abs() < 1e-8 * expect_gn,
                "f_t = {f_t}: f_gn = {} vs {expect_gn}",
                f.f_gn
            );
        }
    }

    #[test]
    fn system_loses_rank_at_singular_pose() {
        let p = params(0.2);
        let x = State::new(0.4, p.beta, 0.3, -0.2);
        let (mat, _) = contact_system(&x, &ControlInput::new(0.1, 2.0), &p);
        let lu = Lu4::new(&mat);
        assert!(lu.is_singular() || lu.det().abs() < 1e-12);
        // One step outside the band the system is comfortably solvable.
        let x2 = State::new(0.4, p.beta + 0.01, 0.3, -0.2);
        let (mat2, _) = contact_system(&x2, &ControlInput::new(0.1, 2.0), &p);
        assert!(Lu4::new(&mat2).cond1() < 1e7);
    }

    #[test]
    fn nudged_average_is_continuous_with_direct_solve() {
        let p = params(0.2);
        let u = ControlInput::new(0.2, 3.0);
        let near = State::new(0.1, p.beta + 1e-9, 0.5, 0.3);
        let outside = State::new(0.1, p.beta + 5.0 * SINGULAR_NUDGE, 0.5, 0.3);
        let f_near = solve_contact_forces(&near, &u, &p).unwrap();
        let f_out = solve_contact_forces(&outside, &u, &p).unwrap();
        // Genuine state variation over 5e-3 rad only; agreement well inside
        // the 0.1% continuity budget.
        let rel = (f_near.f_gn - f_out.f_gn).abs() / f_out.f_gn.abs();
        assert!(rel < 1e-3, "rel = {rel}");
    }

    #[test]
    fn cone_tightens_with_smaller_friction() {
        let p = params(0.3);
        let x = State::new(0.0, 0.05, 1.0, 0.1);
        let u = ControlInput::new(0.4, 0.0);
        let f = solve_contact_forces(&x, &u, &p).unwrap();
        let loose = noslip_constraints(&f, &p);
        let tight = noslip_constraints(
            &f,
            &RobotParams {
                mu_s: 0.2,
                ..p
            },
        );
        assert!(tight.h2 > loose.h2);
        assert!((loose.h1 - tight.h1).abs() < 1e-15);
    }
}
