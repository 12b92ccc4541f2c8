//! Independent plant model used to validate the no-slip assumptions.
//!
//! Unlike the reduced model, the wheel center here translates freely in the
//! plane: the state carries the wheel position and velocity alongside the
//! wheel angle and body pitch. Ground contact is a stiff unilateral
//! spring-damper acting on wheel penetration, and the tangential force
//! follows a regularized Stribeck friction curve, so the wheel can lift off
//! and slip. The body stays pinned to the axle; that joint is eliminated
//! analytically, leaving four degrees of freedom integrated with a
//! semi-implicit Euler scheme at a physics step much shorter than the
//! control period.
//!
//! None of the code here shares the reduced model's mass matrix or contact
//! solve, which is what makes agreement between the two models a meaningful
//! check rather than a tautology.

use crate::dynamics::{motor_torque, thrust_dir, ControlInput, RobotParams, State};
use crate::math::{rotate, rotate_deriv, Lu4, Vec2};
// With `std` linked (tests), inherent f64 methods shadow this shim.
#[allow(unused_imports)]
use crate::math::FloatExt;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Compliant ground and integration parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundModel {
    /// Normal contact stiffness (N/m).
    pub k_ground: f64,
    /// Normal contact damping (N s/m).
    pub c_ground: f64,
    /// Friction coefficient at zero slip speed.
    pub mu_static: f64,
    /// Friction coefficient at large slip speed.
    pub mu_coulomb: f64,
    /// Slip speed scale of the static-to-coulomb transition (m/s).
    pub v_stribeck: f64,
    /// Slip speed below which friction is linearly regularized (m/s).
    pub v_reg: f64,
    /// Physics integration step (s).
    pub dt_physics: f64,
    /// Penetration beyond which the run is declared nonphysical (m).
    pub max_penetration: f64,
}

impl Default for GroundModel {
    /// Stiffness and damping are chosen so a contact transient settles well
    /// within one 5 ms control period for the nominal robot mass.
    fn default() -> GroundModel {
        GroundModel {
            k_ground: 1e5,
            c_ground: 2e3,
            mu_static: 0.7,
            mu_coulomb: 0.6,
            v_stribeck: 0.01,
            v_reg: 1e-3,
            dt_physics: 2e-5,
            max_penetration: 0.05,
        }
    }
}

impl GroundModel {
    /// Friction coefficients may be zero (for energy bookkeeping checks);
    /// stiffness, the velocity scales and the time step must be positive.
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("k_ground", self.k_ground),
            ("v_stribeck", self.v_stribeck),
            ("v_reg", self.v_reg),
            ("dt_physics", self.dt_physics),
            ("max_penetration", self.max_penetration),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(format!("{name} must be strictly positive, got {v}"));
            }
        }
        for (name, v) in [
            ("c_ground", self.c_ground),
            ("mu_static", self.mu_static),
            ("mu_coulomb", self.mu_coulomb),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.mu_coulomb > self.mu_static {
            return Err(format!(
                "mu_coulomb = {} must not exceed mu_static = {}",
                self.mu_coulomb, self.mu_static
            ));
        }
        Ok(())
    }

    /// Friction coefficient at slip speed `v` on the Stribeck curve.
    #[inline]
    pub fn mu(&self, v_slip: f64) -> f64 {
        let s = v_slip / self.v_stribeck;
        self.mu_coulomb + (self.mu_static - self.mu_coulomb) * (-s * s).exp()
    }
}

/// Free-plant state: wheel-center pose and rates plus the two angles.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FreeState {
    pub p_w: Vec2,
    pub phi: f64,
    pub theta: f64,
    pub v_w: Vec2,
    pub phi_dot: f64,
    pub theta_dot: f64,
}

impl FreeState {
    /// Places the free plant so it matches a reduced-model state: rolling
    /// velocity, and the wheel settled onto the ground at the static
    /// penetration for the robot's weight (so runs do not start with a
    /// contact transient).
    pub fn from_reduced(x: &State, ground: &GroundModel, p: &RobotParams) -> FreeState {
        let e = p.slope_dir();
        let n = p.slope_normal();
        let pen = p.total_mass() * p.g * p.beta.cos() / ground.k_ground;
        FreeState {
            p_w: e.scale(x.phi * p.r) + n.scale(p.r - pen),
            phi: x.phi,
            theta: x.theta,
            v_w: e.scale(x.phi_dot * p.r),
            phi_dot: x.phi_dot,
            theta_dot: x.theta_dot,
        }
    }

    /// Projection onto the reduced state (drops the wheel-center pose,
    /// which the reduced model ties to `phi`).
    pub fn to_reduced(&self) -> State {
        State {
            phi: self.phi,
            theta: self.theta,
            phi_dot: self.phi_dot,
            theta_dot: self.theta_dot,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p_w.x.is_finite()
            && self.p_w.y.is_finite()
            && self.phi.is_finite()
            && self.theta.is_finite()
            && self.v_w.x.is_finite()
            && self.v_w.y.is_finite()
            && self.phi_dot.is_finite()
            && self.theta_dot.is_finite()
    }
}

/// Instantaneous ground reaction of the compliant contact.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContactSample {
    /// Tangential ground force on the wheel, uphill positive (N).
    pub f_gx: f64,
    /// Normal ground force on the wheel (N), never negative.
    pub f_gn: f64,
    /// Wheel penetration into the ground (m), negative when airborne.
    pub penetration: f64,
    /// Tangential velocity of the wheel material point at the contact (m/s).
    pub v_slip: f64,
}

/// Evaluates the spring-damper normal force and Stribeck friction for the
/// current wheel pose. The ground surface is the slope line through the
/// origin; penetration is how far the wheel rim passes below it.
pub fn compliant_contact_force(
    fs: &FreeState,
    ground: &GroundModel,
    p: &RobotParams,
) -> ContactSample {
    let e = p.slope_dir();
    let n = p.slope_normal();
    let penetration = p.r - n.dot(fs.p_w);
    // Contact-point tangential velocity: wheel-center motion plus the rim
    // speed of the spin, signed so that rolling per the reduced model gives
    // exactly zero.
    let v_slip = e.dot(fs.v_w) - p.r * fs.phi_dot;
    if penetration <= 0.0 {
        return ContactSample {
            f_gx: 0.0,
            f_gn: 0.0,
            penetration,
            v_slip,
        };
    }
    let separation_rate = n.dot(fs.v_w);
    let f_gn = (ground.k_ground * penetration - ground.c_ground * separation_rate).max(0.0);
    let f_gx = -f_gn * ground.mu(v_slip) * (v_slip / ground.v_reg).clamp(-1.0, 1.0);
    ContactSample {
        f_gx,
        f_gn,
        penetration,
        v_slip,
    }
}

/// Accelerations `[a_wx, a_wy, phi_dd, theta_dd]` of the free plant.
///
/// The wheel-body pin joint is eliminated by writing the body center of
/// mass as an offset of the wheel center, which couples the translational
/// rows to the pitch row of the 4x4 mass matrix.
pub fn free_dynamics(
    fs: &FreeState,
    u: &ControlInput,
    ground: &GroundModel,
    p: &RobotParams,
) -> [f64; 4] {
    let contact = compliant_contact_force(fs, ground, p);
    free_dynamics_with_contact(fs, u, &contact, p)
}

/// Same as [`free_dynamics`] but with the ground reaction supplied by the
/// caller, so the per-step loop evaluates the contact only once.
pub fn free_dynamics_with_contact(
    fs: &FreeState,
    u: &ControlInput,
    contact: &ContactSample,
    p: &RobotParams,
) -> [f64; 4] {
    let e = p.slope_dir();
    let n = p.slope_normal();
    let mt = p.m_b + p.m_w;
    let rd = rotate_deriv(fs.theta, p.l_b);
    let rl = rotate(fs.theta, p.l_b);

    let mass = [
        [mt, 0.0, 0.0, p.m_b * rd.x],
        [0.0, mt, 0.0, p.m_b * rd.y],
        [0.0, 0.0, p.i_w, 0.0],
        [p.m_b * rd.x, p.m_b * rd.y, 0.0, p.m_b * p.l_b.norm_sq() + p.i_b],
    ];

    let f_ground = e.scale(contact.f_gx) + n.scale(contact.f_gn);
    let d = thrust_dir(fs.theta);
    let tau = motor_torque(u.u_m, fs.phi_dot, p);
    let w2 = fs.theta_dot * fs.theta_dot;

    // Right-hand side: applied forces minus centripetal and gravity terms.
    let rhs = [
        f_ground.x + u.f_t * d.x + p.m_b * w2 * rl.x,
        f_ground.y + u.f_t * d.y + p.m_b * w2 * rl.y - mt * p.g,
        tau - p.r * contact.f_gx,
        -tau + u.f_t * rotate_deriv(fs.theta, p.l_t).dot(d) - p.m_b * p.g * rd.y,
    ];

    Lu4::new(&mass)
        .solve(rhs)
        .expect("free-plant mass matrix is positive definite")
}

/// Total mechanical energy of the free plant plus the energy stored in the
/// contact spring; used for dissipation bookkeeping in tests.
pub fn mechanical_energy(fs: &FreeState, ground: &GroundModel, p: &RobotParams) -> f64 {
    let v_b = fs.v_w + rotate_deriv(fs.theta, p.l_b).scale(fs.theta_dot);
    let p_b = fs.p_w + rotate(fs.theta, p.l_b);
    let kinetic = 0.5 * p.m_w * fs.v_w.norm_sq()
        + 0.5 * p.i_w * fs.phi_dot * fs.phi_dot
        + 0.5 * p.m_b * v_b.norm_sq()
        + 0.5 * p.i_b * fs.theta_dot * fs.theta_dot;
    let potential = p.m_w * p.g * fs.p_w.y + p.m_b * p.g * p_b.y;
    let pen = p.r - p.slope_normal().dot(fs.p_w);
    let spring = if pen > 0.0 {
        0.5 * ground.k_ground * pen * pen
    } else {
        0.0
    };
    kinetic + potential + spring
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    /// Penetration exceeded the configured maximum: the contact model is no
    /// longer meaningful (wheel driven through the floor).
    NonPhysicalPenetration { t: f64, penetration: f64 },
    /// A state component left the floating-point range.
    NonFiniteState { t: f64 },
}

impl core::fmt::Display for SimError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SimError::NonPhysicalPenetration { t, penetration } => write!(
                f,
                "nonphysical penetration {penetration:.4} m at t = {t:.4} s"
            ),
            SimError::NonFiniteState { t } => write!(f, "non-finite state at t = {t:.4} s"),
        }
    }
}

/// Stepping truth simulator holding the plant state between control periods.
pub struct TruthSim {
    pub state: FreeState,
    pub t: f64,
    ground: GroundModel,
    params: RobotParams,
}

impl TruthSim {
    pub fn new(initial: FreeState, ground: GroundModel, params: RobotParams) -> TruthSim {
        TruthSim {
            state: initial,
            t: 0.0,
            ground,
            params,
        }
    }

    pub fn ground(&self) -> &GroundModel {
        &self.ground
    }

    /// Ground reaction at the current state.
    pub fn contact(&self) -> ContactSample {
        compliant_contact_force(&self.state, &self.ground, &self.params)
    }

    /// Integrates the plant for `duration` under a held input. `duration`
    /// must be an integer number of physics steps so repeated calls stay
    /// exactly on the control grid.
    pub fn advance(&mut self, u: &ControlInput, duration: f64) -> Result<(), SimError> {
        let dt = self.ground.dt_physics;
        let steps = libm::round(duration / dt) as usize;
        debug_assert!(
            (steps as f64 * dt - duration).abs() < 1e-9,
            "control period must be a multiple of dt_physics"
        );
        for _ in 0..steps {
            let contact = compliant_contact_force(&self.state, &self.ground, &self.params);
            if contact.penetration > self.ground.max_penetration {
                return Err(SimError::NonPhysicalPenetration {
                    t: self.t,
                    penetration: contact.penetration,
                });
            }
            let acc = free_dynamics_with_contact(&self.state, u, &contact, &self.params);
            // Semi-implicit Euler: rates first, then positions with the
            // updated rates.
            let s = &mut self.state;
            s.v_w.x += dt * acc[0];
            s.v_w.y += dt * acc[1];
            s.phi_dot += dt * acc[2];
            s.theta_dot += dt * acc[3];
            s.p_w.x += dt * s.v_w.x;
            s.p_w.y += dt * s.v_w.y;
            s.phi += dt * s.phi_dot;
            s.theta += dt * s.theta_dot;
            self.t += dt;
            if !self.state.is_finite() {
                return Err(SimError::NonFiniteState { t: self.t });
            }
        }
        Ok(())
    }
}

/// One record per control period of a closed-loop run.
#[derive(Clone, Copy, Debug)]
pub struct SimSample {
    pub t: f64,
    pub state: FreeState,
    pub u: ControlInput,
    /// Ground reaction at the instant the input was sampled.
    pub contact: ContactSample,
}

/// Runs the plant for `t_end` seconds, calling `controller` once per
/// control period (zero-order hold in between) and recording one sample per
/// period.
pub fn simulate<C>(
    initial: FreeState,
    t_end: f64,
    control_dt: f64,
    ground: GroundModel,
    params: RobotParams,
    mut controller: C,
) -> Result<Vec<SimSample>, SimError>
where
    C: FnMut(f64, &FreeState) -> ControlInput,
{
    let mut sim = TruthSim::new(initial, ground, params);
    let steps = libm::round(t_end / control_dt) as usize;
    let mut log = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 * control_dt;
        let u = controller(t, &sim.state);
        log.push(SimSample {
            t,
            state: sim.state,
            u,
            contact: sim.contact(),
        });
        sim.advance(&u, control_dt)?;
    }
    Ok(log)
}
