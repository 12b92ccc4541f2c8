//! Baseline control: cascaded PID balancing, static equilibrium solvers,
//! climb reference generation and the PID-to-MPC handover scheduler.
//!
//! The PID is a classical two-loop cascade. An outer loop turns wheel
//! speed error into a small pitch command (the robot leans into the
//! direction it wants to accelerate), and an inner loop turns pitch error
//! into motor effort. It knows nothing about contact constraints and never
//! fires the thrusters, which is exactly what makes it a useful foil for
//! the predictive controller.

use crate::dynamics::{ControlInput, RobotParams, State};
// With `std` linked (tests), inherent f64 methods shadow this shim.
#[allow(unused_imports)]
use crate::math::FloatExt;
use crate::mpc::{self, shift_warm_start, MpcConfig, MpcSolution, SqpStatus};

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PidGains {
    /// Pitch error to motor effort.
    pub kp: f64,
    /// Integrated pitch error to motor effort.
    pub ki: f64,
    /// Pitch rate damping.
    pub kd: f64,
    /// Wheel speed error to pitch command.
    pub kv: f64,
    /// Integrated wheel speed error to pitch command.
    pub kvi: f64,
    /// Largest pitch command offset the outer loop may request (rad).
    pub pitch_cmd_limit: f64,
    /// Clamp on the integral contribution to motor effort.
    pub integral_clamp: f64,
    /// Clamp on the integral contribution to the pitch command (rad).
    pub vel_integral_clamp: f64,
}

impl Default for PidGains {
    /// Gains from a closed-loop sweep on the reduced model (see the `tune`
    /// example). All signs are negative because on the default robot the
    /// drivetrain's reflected inertia makes reaction torque dominate: a
    /// positive motor command pitches the body *down*
    /// (`d theta_dd / d u_m < 0`), and a forward acceleration is sustained
    /// by a *positive* lean.
    fn default() -> PidGains {
        PidGains {
            kp: -8.0,
            ki: -8.0,
            kd: -0.4,
            kv: -0.02,
            kvi: -0.004,
            pitch_cmd_limit: 0.3,
            integral_clamp: 0.4,
            vel_integral_clamp: 0.1,
        }
    }
}

/// Two-loop balancing controller. Thrust output is always zero.
#[derive(Clone, Debug)]
pub struct PidController {
    pub gains: PidGains,
    pitch_integral: f64,
    vel_integral: f64,
}

impl PidController {
    pub fn new(gains: PidGains) -> PidController {
        PidController {
            gains,
            pitch_integral: 0.0,
            vel_integral: 0.0,
        }
    }

    pub fn reset(&mut self) {
        self.pitch_integral = 0.0;
        self.vel_integral = 0.0;
    }

    /// One control update. `reference` supplies the wheel speed target and
    /// the trim pitch around which the outer loop works.
    pub fn step(&mut self, x: &State, reference: &State, dt: f64) -> ControlInput {
        let g = self.gains;

        let e_v = reference.phi_dot - x.phi_dot;
        self.vel_integral += e_v * dt;
        let vi_max = if g.kvi != 0.0 {
            g.vel_integral_clamp / g.kvi.abs()
        } else {
            0.0
        };
        self.vel_integral = self.vel_integral.clamp(-vi_max, vi_max);
        // The outer loop leans the body to sustain acceleration. The sign
        // of `kv` encodes which way: it must match the sign of the steady
        // lean that accelerates the wheel forward, which depends on whether
        // drivetrain reaction torque or center-of-mass offset dominates.
        let offset = (-g.kv * e_v - g.kvi * self.vel_integral)
            .clamp(-g.pitch_cmd_limit, g.pitch_cmd_limit);
        let theta_cmd = reference.theta + offset;

        let e_th = theta_cmd - x.theta;
        self.pitch_integral += e_th * dt;
        let pi_max = if g.ki != 0.0 {
            g.integral_clamp / g.ki.abs()
        } else {
            0.0
        };
        self.pitch_integral = self.pitch_integral.clamp(-pi_max, pi_max);
        let u_m = g.kp * e_th + g.ki * self.pitch_integral
            - g.kd * (x.theta_dot - reference.theta_dot);

        ControlInput::new(u_m.clamp(-1.0, 1.0), 0.0)
    }
}

/// Residual of the standstill force balance at pitch `theta` with thrust
/// held at `f_t`: zero exactly at an equilibrium pitch.
fn standstill_residual(theta: f64, f_t: f64, p: &RobotParams) -> f64 {
    let gravity_pitch = p.m_b * p.g * (p.l_b.x * theta.cos() - p.l_b.y * theta.sin());
    let gravity_wheel = p.total_mass() * p.g * p.r * p.beta.sin();
    let bt = crate::dynamics::thrust_input_map(theta, p);
    gravity_pitch + gravity_wheel - (bt[0] + bt[1]) * f_t
}

/// Pitch at which the robot can stand still on the slope with the motor
/// alone opposing gravity and the thruster held at `f_t`. Returns `None`
/// when no equilibrium exists in the upright range.
pub fn equilibrium_pitch(f_t: f64, p: &RobotParams) -> Option<f64> {
    // Bracket the root on a coarse grid, preferring the crossing closest
    // to upright, then bisect.
    let lo = -1.4;
    let hi = 1.4;
    let n = 280;
    let step = (hi - lo) / n as f64;
    let mut bracket: Option<(f64, f64)> = None;
    let mut best_dist = f64::INFINITY;
    let mut prev_t = lo;
    let mut prev_r = standstill_residual(lo, f_t, p);
    for i in 1..=n {
        let t = lo + i as f64 * step;
        let r = standstill_residual(t, f_t, p);
        if prev_r == 0.0 {
            return Some(prev_t);
        }
        if prev_r * r < 0.0 {
            let mid = 0.5 * (prev_t + t);
            if mid.abs() < best_dist {
                best_dist = mid.abs();
                bracket = Some((prev_t, t));
            }
        }
        prev_t = t;
        prev_r = r;
    }
    let (mut a, mut b) = bracket?;
    let mut ra = standstill_residual(a, f_t, p);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let rm = standstill_residual(m, f_t, p);
        if rm == 0.0 || b - a < 1e-14 {
            return Some(m);
        }
        if ra * rm < 0.0 {
            b = m;
        } else {
            a = m;
            ra = rm;
        }
    }
    Some(0.5 * (a + b))
}

/// Motor effort that holds the standstill equilibrium at `theta_eq` with
/// thrust `f_t`.
pub fn equilibrium_input(theta_eq: f64, f_t: f64, p: &RobotParams) -> ControlInput {
    let bt = crate::dynamics::thrust_input_map(theta_eq, p);
    let gravity_wheel = p.total_mass() * p.g * p.r * p.beta.sin();
    let u_m = (gravity_wheel - bt[0] * f_t) / p.k1;
    ControlInput::new(u_m, f_t)
}

/// Pitch and motor effort that sustain a steady wheel-line acceleration
/// `a` (m/s^2) with thrust held at `f_t`, solving
/// `M(theta) [a/r, 0] + h(theta) = B(theta) [u_m, f_t]` for `(theta, u_m)`
/// by Newton iteration seeded at the standstill trim. Returns `None` when
/// no standstill trim exists to seed from or the iteration degenerates.
pub fn acceleration_trim(a: f64, f_t: f64, p: &RobotParams) -> Option<(f64, f64)> {
    let te = equilibrium_pitch(f_t, p)?;
    let ue = equilibrium_input(te, f_t, p);
    let mut th = te;
    let mut um = ue.u_m;
    let resid = |th: f64, um: f64| -> [f64; 2] {
        let x = State::new(0.0, th, 0.0, 0.0);
        let d = crate::dynamics::dynamics_terms(&x, p);
        let qdd0 = a / p.r;
        [
            d.m[0][0] * qdd0 + d.h[0] - d.b[0][0] * um - d.b[0][1] * f_t,
            d.m[1][0] * qdd0 + d.h[1] - d.b[1][0] * um - d.b[1][1] * f_t,
        ]
    };
    for _ in 0..50 {
        let r0 = resid(th, um);
        let eps = 1e-6;
        let r_th = resid(th + eps, um);
        let r_um = resid(th, um + eps);
        let j = [
            [(r_th[0] - r0[0]) / eps, (r_um[0] - r0[0]) / eps],
            [(r_th[1] - r0[1]) / eps, (r_um[1] - r0[1]) / eps],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-12 {
            return None;
        }
        let dth = (r0[0] * j[1][1] - r0[1] * j[0][1]) / det;
        let dum = (j[0][0] * r0[1] - j[1][0] * r0[0]) / det;
        th -= dth;
        um -= dum;
        if dth.abs() < 1e-12 && dum.abs() < 1e-10 {
            return Some((th, um));
        }
    }
    Some((th, um))
}

/// Robot model used by [`ClimbPlan`] to lean the pitch reference during
/// speed ramps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeanModel {
    pub params: RobotParams,
    /// Thrust the trim solve assumes is being applied (N).
    pub f_t_ff: f64,
}

/// Smooth wheel speed profile: hold, S-curve ramp, cruise. The pitch
/// reference is the trim angle, optionally shifted by the model's
/// acceleration trim while the ramp is accelerating so the commanded
/// posture itself produces the commanded acceleration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClimbPlan {
    /// Time the ramp begins (s).
    pub t_start: f64,
    /// Ramp duration (s); zero means a step change.
    pub t_ramp: f64,
    /// Cruise wheel speed (rad/s).
    pub v_cruise: f64,
    /// Trim pitch tracked outside the ramp (rad).
    pub theta_ref: f64,
    /// Wheel angle at the start of the plan (rad).
    pub phi0: f64,
    /// When present, lean the pitch reference by the acceleration trim.
    pub lean: Option<LeanModel>,
}

impl ClimbPlan {
    /// Standstill plan: zero speed, constant trim pitch.
    pub fn hold(theta_ref: f64) -> ClimbPlan {
        ClimbPlan {
            t_start: 0.0,
            t_ramp: 0.0,
            v_cruise: 0.0,
            theta_ref,
            phi0: 0.0,
            lean: None,
        }
    }

    /// Wheel angle, wheel speed and wheel acceleration (rad, rad/s,
    /// rad/s^2) at time `t`. The ramp follows a cubic smoothstep in speed,
    /// so acceleration starts and ends at zero and peaks at
    /// `1.5 v_cruise / t_ramp` mid-ramp.
    pub fn speed_profile(&self, t: f64) -> (f64, f64, f64) {
        if t <= self.t_start {
            (self.phi0, 0.0, 0.0)
        } else if self.t_ramp > 0.0 && t < self.t_start + self.t_ramp {
            let tau = (t - self.t_start) / self.t_ramp;
            let s = tau * tau * (3.0 - 2.0 * tau);
            let s_int = tau * tau * tau * (1.0 - 0.5 * tau);
            let s_dot = 6.0 * tau * (1.0 - tau) / self.t_ramp;
            (
                self.phi0 + self.v_cruise * self.t_ramp * s_int,
                self.v_cruise * s,
                self.v_cruise * s_dot,
            )
        } else {
            let ramp_dist = 0.5 * self.v_cruise * self.t_ramp;
            let s = t - self.t_start - self.t_ramp;
            (self.phi0 + ramp_dist + self.v_cruise * s, self.v_cruise, 0.0)
        }
    }

    /// Reference state at time `t`. The wheel angle reference integrates
    /// the speed profile so position tracking stays consistent with it.
    pub fn reference(&self, t: f64) -> State {
        let (phi, phi_dot, accel) = self.speed_profile(t);
        let theta = match self.lean {
            Some(lm) if accel != 0.0 => {
                acceleration_trim(accel * lm.params.r, lm.f_t_ff, &lm.params)
                    .map(|(th, _)| th)
                    .unwrap_or(self.theta_ref)
            }
            _ => self.theta_ref,
        };
        State {
            phi,
            theta,
            phi_dot,
            theta_dot: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActiveController {
    Pid,
    Mpc,
}

impl ActiveController {
    pub fn label(&self) -> &'static str {
        match self {
            ActiveController::Pid => "pid",
            ActiveController::Mpc => "mpc",
        }
    }
}

/// Result of one scheduler update.
#[derive(Clone, Debug)]
pub struct SchedulerStep {
    pub u: ControlInput,
    pub active: ActiveController,
    /// Present whenever the predictive solver ran this period, including
    /// periods where its output was rejected.
    pub solution: Option<MpcSolution>,
    /// True when the solver ran but the PID output was used instead.
    pub fell_back: bool,
}

/// Runs the PID until the handover time, then the predictive controller
/// with a warm start carried between periods. If a solve comes back
/// infeasible-relaxed the scheduler applies the PID action for that period
/// instead and keeps counting.
pub struct Scheduler {
    pub pid: PidController,
    pub mpc_cfg: MpcConfig,
    /// Simulation time at which the predictive controller takes over (s).
    pub t_enable: f64,
    /// Thrust the PID path applies as a feedforward (N). The PID only
    /// shapes the motor channel, so whenever it is in charge the thrust
    /// allocation must be carried through unchanged.
    pub f_t_ff: f64,
    pub fallback_count: usize,
    warm: Option<Vec<ControlInput>>,
    last_pid_u: f64,
}

impl Scheduler {
    pub fn new(gains: PidGains, mpc_cfg: MpcConfig, t_enable: f64, f_t_ff: f64) -> Scheduler {
        Scheduler {
            pid: PidController::new(gains),
            mpc_cfg,
            t_enable,
            f_t_ff,
            fallback_count: 0,
            warm: None,
            last_pid_u: 0.0,
        }
    }

    /// One control period. `reference` must be valid over the whole
    /// prediction horizon beyond `t`.
    pub fn step<F>(
        &mut self,
        t: f64,
        x: &State,
        reference: &F,
        p: &RobotParams,
    ) -> SchedulerStep
    where
        F: Fn(f64) -> State,
    {
        // The PID runs every period so its integrators stay current and a
        // fallback is bumpless.
        let mut u_pid = self.pid.step(x, &reference(t), self.mpc_cfg.dt);
        u_pid.f_t = self
            .f_t_ff
            .clamp(self.mpc_cfg.u_min[1], self.mpc_cfg.u_max[1]);
        if t < self.t_enable {
            self.last_pid_u = u_pid.u_m;
            return SchedulerStep {
                u: u_pid,
                active: ActiveController::Pid,
                solution: None,
                fell_back: false,
            };
        }

        let n_h = self.mpc_cfg.n_h;
        let dt = self.mpc_cfg.dt;
        let f_t_seed = self
            .f_t_ff
            .clamp(self.mpc_cfg.u_min[1], self.mpc_cfg.u_max[1]);
        let last_pid_u = self.last_pid_u;
        let warm = self
            .warm
            .get_or_insert_with(|| vec![ControlInput::new(last_pid_u, f_t_seed); n_h]);
        let refs: Vec<State> = (1..=n_h).map(|k| reference(t + k as f64 * dt)).collect();
        let sol = mpc::solve_mpc(x, &refs, warm, &self.mpc_cfg, p);

        if sol.status == SqpStatus::InfeasibleRelaxed {
            self.fallback_count += 1;
            // Reseed the next warm start from the PID action rather than
            // the rejected sequence.
            *warm = vec![u_pid; n_h];
            return SchedulerStep {
                u: u_pid,
                active: ActiveController::Pid,
                solution: Some(sol),
                fell_back: true,
            };
        }

        *warm = sol.u_seq.clone();
        shift_warm_start(warm);
        let u = sol.u_seq[0];
        SchedulerStep {
            u,
            active: ActiveController::Mpc,
            solution: Some(sol),
            fell_back: false,
        }
    }
}
