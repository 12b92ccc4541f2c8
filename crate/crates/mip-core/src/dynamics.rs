//! Rigid-body model of the robot balancing on an incline.
//!
//! The robot is treated as two planar bodies: a wheel pair (lumped into one
//! wheel) rolling without slip on a slope of angle `beta`, and a body pinned
//! to the wheel axle carrying a thruster. Generalized coordinates are the
//! wheel rolling angle `phi` and the body pitch `theta`; rolling ties the
//! wheel-center position to `phi`, so the whole robot has two degrees of
//! freedom. Inputs are the motor duty cycle and the thruster force.
//!
//! `dynamics_terms` returns the mass matrix `M`, bias vector `h` and input
//! map `B` of `M(q) qdd + h(q, qd) = B(q) u`, all derived by hand from the
//! Lagrangian; `total_energy` computes kinetic and potential energy through
//! the explicit body velocities instead, so the two paths cross-check each
//! other in the tests.

use crate::math::{rotate, rotate_deriv, solve_sym2, unit_vec, Vec2};
// With `std` linked (tests), inherent f64 methods shadow this shim.
#[allow(unused_imports)]
use crate::math::FloatExt;

use alloc::format;
use alloc::string::String;

/// Physical parameters of the robot and its environment.
///
/// Vectors `l_b` and `l_t` are expressed in the body frame with origin at
/// the wheel axle; their components are meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotParams {
    /// Body mass (kg), everything that pitches with the pendulum.
    pub m_b: f64,
    /// Wheel mass (kg), lumped over both wheels.
    pub m_w: f64,
    /// Body pitch inertia about its own center of mass (kg m^2).
    pub i_b: f64,
    /// Wheel spin inertia about the axle (kg m^2), both wheels.
    pub i_w: f64,
    /// Wheel radius (m).
    pub r: f64,
    /// Incline angle (rad), zero for flat ground, positive uphill in +x.
    pub beta: f64,
    /// Body-frame offset from the axle to the body center of mass (m).
    pub l_b: Vec2,
    /// Body-frame offset from the axle to the thruster (m).
    pub l_t: Vec2,
    /// Signed moment arm of the thrust about the axle at zero pitch (m).
    /// Must be consistent with `l_t`; checked in [`RobotParams::validate`].
    pub l_tz: f64,
    /// Gravitational acceleration (m/s^2).
    pub g: f64,
    /// Motor gain: wheel torque per unit duty cycle (N m).
    pub k1: f64,
    /// Motor back-EMF damping: torque per wheel rate (N m s/rad).
    pub k2: f64,
    /// Static friction coefficient of the wheel-ground contact.
    pub mu_s: f64,
    /// Maximum thruster force (N).
    pub f_t_max: f64,
}

impl Default for RobotParams {
    /// Nominal parameter set for a ~6 kg prototype with 0.2 m diameter
    /// wheels, a compact dense body whose center of mass sits 0.20 m above
    /// the axle, thrusters mounted at 0.314 m, and roughly 21.6 N of usable
    /// thrust. `i_w` is the drivetrain inertia reflected through the gear
    /// reduction to the wheel (gearbox plus rotor), which is why it dwarfs
    /// the bare wheel's own `m r^2`; that reflected inertia is what lets a
    /// short-horizon controller steer pitch mostly through reaction torque.
    /// The values are plausible estimates for such a platform, not measured
    /// ones.
    fn default() -> RobotParams {
        RobotParams {
            m_b: 4.5,
            m_w: 1.5,
            i_b: 0.072,
            i_w: 0.3,
            r: 0.10,
            beta: 0.0,
            l_b: Vec2::new(0.0, 0.20),
            l_t: Vec2::new(0.0, 0.314),
            l_tz: -0.314,
            g: 9.81,
            k1: 8.0,
            k2: 0.1,
            mu_s: 0.7,
            f_t_max: 21.6,
        }
    }
}

impl RobotParams {
    /// Checks physical plausibility and internal consistency.
    ///
    /// `k2` may be zero (damping disabled for conservative-energy checks),
    /// every other scalar must be strictly positive. `l_b` must have nonzero
    /// length or the pendulum degenerates and the contact-force system loses
    /// rank everywhere. `l_tz` must numerically equal the thrust moment
    /// about the axle at zero pitch implied by `l_t`.
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("m_b", self.m_b),
            ("m_w", self.m_w),
            ("i_b", self.i_b),
            ("i_w", self.i_w),
            ("r", self.r),
            ("g", self.g),
            ("k1", self.k1),
            ("mu_s", self.mu_s),
            ("f_t_max", self.f_t_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be strictly positive, got {v}"));
            }
        }
        if !(self.k2 >= 0.0) || !self.k2.is_finite() {
            return Err(format!("k2 must be non-negative, got {}", self.k2));
        }
        if !(self.beta.abs() < core::f64::consts::FRAC_PI_2) {
            return Err(format!(
                "beta must lie in (-pi/2, pi/2), got {}",
                self.beta
            ));
        }
        if self.l_b.norm() < 1e-9 {
            return Err(String::from("l_b must have nonzero length"));
        }
        // Thrust moment about the axle at theta = 0, computed from the same
        // input map the dynamics use.
        let bt = thrust_input_map(0.0, self);
        if (self.l_tz - bt[1]).abs() > 1e-9 * self.l_tz.abs().max(1.0) {
            return Err(format!(
                "l_tz = {} inconsistent with l_t (moment about axle at zero pitch is {})",
                self.l_tz, bt[1]
            ));
        }
        Ok(())
    }

    /// Total robot mass (kg).
    #[inline]
    pub fn total_mass(&self) -> f64 {
        self.m_b + self.m_w
    }

    /// Unit vector pointing uphill along the slope.
    #[inline]
    pub fn slope_dir(&self) -> Vec2 {
        unit_vec(self.beta)
    }

    /// Unit vector normal to the slope, pointing away from the ground.
    #[inline]
    pub fn slope_normal(&self) -> Vec2 {
        unit_vec(self.beta + core::f64::consts::FRAC_PI_2)
    }
}

/// Reduced state: wheel angle, body pitch and their rates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct State {
    pub phi: f64,
    pub theta: f64,
    pub phi_dot: f64,
    pub theta_dot: f64,
}

impl State {
    pub fn new(phi: f64, theta: f64, phi_dot: f64, theta_dot: f64) -> State {
        State {
            phi,
            theta,
            phi_dot,
            theta_dot,
        }
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.phi, self.theta, self.phi_dot, self.theta_dot]
    }

    #[inline]
    pub fn from_array(a: [f64; 4]) -> State {
        State {
            phi: a[0],
            theta: a[1],
            phi_dot: a[2],
            theta_dot: a[3],
        }
    }

    /// Explicit Euler step `x + dt * dx`.
    #[inline]
    pub fn step(self, dx: [f64; 4], dt: f64) -> State {
        State {
            phi: self.phi + dt * dx[0],
            theta: self.theta + dt * dx[1],
            phi_dot: self.phi_dot + dt * dx[2],
            theta_dot: self.theta_dot + dt * dx[3],
        }
    }
}

/// Control input: motor duty cycle in [-1, 1] and thrust in [0, f_t_max].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlInput {
    pub u_m: f64,
    pub f_t: f64,
}

impl ControlInput {
    pub fn new(u_m: f64, f_t: f64) -> ControlInput {
        ControlInput { u_m, f_t }
    }

    pub const ZERO: ControlInput = ControlInput { u_m: 0.0, f_t: 0.0 };
}

/// Positions of the wheel center, body center of mass and thruster for a
/// configuration `(phi, theta)`. All in the inertial frame; the wheel center
/// travels along the slope line through the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WheelKinematics {
    pub p_w: Vec2,
    pub p_b: Vec2,
    pub p_t: Vec2,
}

/// Forward kinematics of the rolling constraint: the wheel center advances
/// `phi * r` along the slope and the body points ride on the pitched body
/// frame.
pub fn wheel_kinematics(phi: f64, theta: f64, p: &RobotParams) -> WheelKinematics {
    let p_w = p.slope_dir().scale(phi * p.r);
    let p_b = p_w + rotate(theta, p.l_b);
    let p_t = p_w + rotate(theta, p.l_t);
    WheelKinematics { p_w, p_b, p_t }
}

/// Direction of the thrust force in the inertial frame for pitch `theta`.
/// At zero pitch the thruster pushes along +x and tilts with the body.
#[inline]
pub fn thrust_dir(theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c, -s)
}

/// Generalized force map of the motor torque: the motor acts on the wheel
/// angle relative to the body, so torque enters `phi` positively and
/// `theta` negatively.
#[inline]
pub fn motor_input_map() -> [f64; 2] {
    [1.0, -1.0]
}

/// Generalized force map of a unit thrust force, i.e. the contact-point
/// Jacobian of the thruster position transposed onto the thrust direction.
/// Component 0 is the force dotted onto the wheel-advance direction times
/// `r`; component 1 is the thrust moment about the axle.
pub fn thrust_input_map(theta: f64, p: &RobotParams) -> [f64; 2] {
    let d = thrust_dir(theta);
    let b0 = p.slope_dir().scale(p.r).dot(d);
    let b1 = rotate_deriv(theta, p.l_t).dot(d);
    [b0, b1]
}

/// Net motor torque on the wheel: duty-cycle gain minus back-EMF damping.
#[inline]
pub fn motor_torque(u_m: f64, phi_dot: f64, p: &RobotParams) -> f64 {
    p.k1 * u_m - p.k2 * phi_dot
}

/// Terms of the manipulator equation `M(q) qdd + h(q, qd) = B(q) u` with
/// `q = [phi, theta]` and `u = [u_m, f_t]`. The back-EMF part of the motor
/// torque is folded into `h`, the duty-cycle gain into the first column of
/// `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicsTerms {
    pub m: [[f64; 2]; 2],
    pub h: [f64; 2],
    pub b: [[f64; 2]; 2],
}

/// Lever of the body center of mass along the slope direction:
/// `slope_dir . d/dtheta [R(theta) l_b]`. This single scalar carries all of
/// the configuration dependence of the mass matrix.
#[inline]
fn com_slope_lever(theta: f64, p: &RobotParams) -> f64 {
    let d = p.beta - theta;
    p.l_b.x * d.sin() - p.l_b.y * d.cos()
}

/// Derivative of [`com_slope_lever`] with respect to `theta`.
#[inline]
fn com_slope_lever_deriv(theta: f64, p: &RobotParams) -> f64 {
    let d = p.beta - theta;
    -p.l_b.x * d.cos() - p.l_b.y * d.sin()
}

pub fn dynamics_terms(x: &State, p: &RobotParams) -> DynamicsTerms {
    let s = com_slope_lever(x.theta, p);
    let s_d = com_slope_lever_deriv(x.theta, p);

    let m11 = (p.m_b + p.m_w) * p.r * p.r + p.i_w;
    let m12 = p.m_b * p.r * s;
    let m22 = p.m_b * p.l_b.norm_sq() + p.i_b;

    // Gravity gradient: potential is
    //   V = (m_b + m_w) g r sin(beta) phi + m_b g (l_bx sin + l_by cos)(theta).
    let (st, ct) = x.theta.sin_cos();
    let grav_phi = (p.m_b + p.m_w) * p.g * p.r * p.beta.sin();
    let grav_theta = p.m_b * p.g * (p.l_b.x * ct - p.l_b.y * st);

    // Velocity products: only M12 depends on the configuration, and the
    // resulting Coriolis terms cancel in the theta row.
    let h_phi = p.m_b * p.r * s_d * x.theta_dot * x.theta_dot + grav_phi + p.k2 * x.phi_dot;
    let h_theta = grav_theta - p.k2 * x.phi_dot;

    let bt = thrust_input_map(x.theta, p);
    let bm = motor_input_map();
    DynamicsTerms {
        m: [[m11, m12], [m12, m22]],
        h: [h_phi, h_theta],
        b: [[p.k1 * bm[0], bt[0]], [p.k1 * bm[1], bt[1]]],
    }
}

/// Generalized accelerations `qdd = M^-1 (B u - h)`.
pub fn generalized_accel(x: &State, u: &ControlInput, p: &RobotParams) -> [f64; 2] {
    let t = dynamics_terms(x, p);
    let rhs = [
        t.b[0][0] * u.u_m + t.b[0][1] * u.f_t - t.h[0],
        t.b[1][0] * u.u_m + t.b[1][1] * u.f_t - t.h[1],
    ];
    solve_sym2(t.m, rhs)
}

/// Time derivative of the reduced state under input `u`, the control-affine
/// form `f(x) + g(x) u` evaluated in one shot.
pub fn state_derivative(x: &State, u: &ControlInput, p: &RobotParams) -> [f64; 4] {
    let qdd = generalized_accel(x, u, p);
    [x.phi_dot, x.theta_dot, qdd[0], qdd[1]]
}

/// Kinetic and potential energy of the reduced model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub kinetic: f64,
    pub potential: f64,
}

impl Energy {
    #[inline]
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential
    }
}

/// Energy computed from the explicit body velocities rather than the mass
/// matrix, so it can serve as an independent cross-check of
/// [`dynamics_terms`]. Potential energy is measured from the slope line
/// through the origin.
pub fn total_energy(x: &State, p: &RobotParams) -> Energy {
    let kin = wheel_kinematics(x.phi, x.theta, p);
    let v_w = p.slope_dir().scale(x.phi_dot * p.r);
    let v_b = v_w + rotate_deriv(x.theta, p.l_b).scale(x.theta_dot);
    let kinetic = 0.5 * p.m_w * v_w.norm_sq()
        + 0.5 * p.i_w * x.phi_dot * x.phi_dot
        + 0.5 * p.m_b * v_b.norm_sq()
        + 0.5 * p.i_b * x.theta_dot * x.theta_dot;
    let potential = p.m_w * p.g * kin.p_w.y + p.m_b * p.g * kin.p_b.y;
    Energy { kinetic, potential }
}

/// Acceleration of the whole-robot center of mass for given generalized
/// accelerations; used to check force balance against the contact forces.
pub fn com_acceleration(x: &State, qdd: [f64; 2], p: &RobotParams) -> Vec2 {
    let a_w = p.slope_dir().scale(qdd[0] * p.r);
    // Body com: p_b = p_w + R(theta) l_b, so
    //   a_b = a_w + thdd R' l_b - thd^2 R l_b.
    let a_b = a_w + rotate_deriv(x.theta, p.l_b).scale(qdd[1])
        - rotate(x.theta, p.l_b).scale(x.theta_dot * x.theta_dot);
    (a_b.scale(p.m_b) + a_w.scale(p.m_w)).scale(1.0 / p.total_mass())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> RobotParams {
        let p = RobotParams::default();
        p.validate().unwrap();
        p
    }

    #[test]
    fn kinematics_on_flat_ground() {
        let p = flat();
        let k = wheel_kinematics(2.0, 0.0, &p);
        assert!((k.p_w.x - 2.0 * p.r).abs() < 1e-15);
        assert!(k.p_w.y.abs() < 1e-15);
        assert!((k.p_b.y - p.l_b.y).abs() < 1e-15);
        assert!((k.p_t.y - p.l_t.y).abs() < 1e-15);
    }

    #[test]
    fn kinematics_on_incline() {
        let p = RobotParams {
            beta: 0.3,
            ..flat()
        };
        let k = wheel_kinematics(1.5, 0.0, &p);
        let d = 1.5 * p.r;
        assert!((k.p_w.x - d * 0.3f64.cos()).abs() < 1e-15);
        assert!((k.p_w.y - d * 0.3f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn motor_map_is_relative_rotation() {
        assert_eq!(motor_input_map(), [1.0, -1.0]);
    }

    #[test]
    fn thrust_map_at_zero_pitch() {
        let p = flat();
        let bt = thrust_input_map(0.0, &p);
        // Thrust along +x at zero pitch: full leverage on the wheel advance,
        // moment about the axle set by the thruster height.
        assert!((bt[0] - p.r).abs() < 1e-15);
        assert!((bt[1] + p.l_t.y).abs() < 1e-15);
    }

    #[test]
    fn mass_matrix_upright_values() {
        let p = flat();
        let t = dynamics_terms(&State::default(), &p);
        let m11 = (p.m_b + p.m_w) * p.r * p.r + p.i_w;
        assert!((t.m[0][0] - m11).abs() < 1e-15);
        assert!((t.m[1][1] - (p.m_b * p.l_b.norm_sq() + p.i_b)).abs() < 1e-15);
        // Upright on flat ground the coupling lever is -l_by.
        assert!((t.m[0][1] + p.m_b * p.r * p.l_b.y).abs() < 1e-15);
        assert_eq!(t.m[0][1], t.m[1][0]);
    }

    #[test]
    fn upright_rest_is_equilibrium() {
        let p = flat();
        let dx = state_derivative(&State::default(), &ControlInput::ZERO, &p);
        for v in dx {
            assert!(v.abs() < 1e-12, "upright rest should not accelerate: {dx:?}");
        }
    }

    #[test]
    fn gravity_tips_the_body_over() {
        let p = flat();
        // Small positive pitch moves the body com backward; gravity must
        // accelerate the pitch further in the same direction.
        let x = State::new(0.0, 0.05, 0.0, 0.0);
        let dx = state_derivative(&x, &ControlInput::ZERO, &p);
        assert!(dx[3] > 0.0, "pitch must diverge, got {}", dx[3]);
    }

    #[test]
    fn thrust_pitches_the_body() {
        let p = flat();
        let x = State::default();
        let u = ControlInput::new(0.0, 5.0);
        let dx = state_derivative(&x, &u, &p);
        // Net pitch acceleration carries the sign of l_tz * f_t for the
        // nominal geometry (checked against the closed-form coupling).
        assert!(dx[3].signum() == (p.l_tz * u.f_t).signum());
        assert!(dx[3] < 0.0);
    }

    #[test]
    fn energy_of_pure_rolling() {
        let p = flat();
        // theta_dot = 0 makes body and wheel translate together.
        let x = State::new(0.3, 0.4, 1.0, 0.0);
        let e = total_energy(&x, &p);
        let expect = 0.5 * (p.m_b + p.m_w) * p.r * p.r + 0.5 * p.i_w;
        assert!((e.kinetic - expect).abs() < 1e-12);
    }

    #[test]
    fn kinetic_energy_matches_mass_matrix() {
        let p = RobotParams {
            beta: 0.25,
            ..flat()
        };
        let x = State::new(0.7, -0.3, 1.3, -2.1);
        let t = dynamics_terms(&x, &p);
        let qd = [x.phi_dot, x.theta_dot];
        let mut quad = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                quad += 0.5 * qd[i] * t.m[i][j] * qd[j];
            }
        }
        let e = total_energy(&x, &p);
        assert!((quad - e.kinetic).abs() < 1e-12 * e.kinetic.abs().max(1.0));
    }

    #[test]
    fn rejects_inconsistent_l_tz() {
        let p = RobotParams {
            l_tz: 0.55,
            ..RobotParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rejects_nonpositive_scalars() {
        let p = RobotParams {
            m_b: 0.0,
            ..RobotParams::default()
        };
        assert!(p.validate().is_err());
        let p = RobotParams {
            k2: -0.1,
            ..RobotParams::default()
        };
        assert!(p.validate().is_err());
        let p = RobotParams {
            k2: 0.0,
            ..RobotParams::default()
        };
        assert!(p.validate().is_ok());
    }
}
