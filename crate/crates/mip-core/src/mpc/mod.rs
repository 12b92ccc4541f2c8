//! Nonlinear model-predictive control by sequential quadratic programming.
//!
//! The decision variable is the input sequence over a short horizon
//! (single shooting). Each SQP iteration rolls the reduced model forward
//! with explicit Euler at the control period, builds a Gauss-Newton model
//! of the tracking cost, linearizes the ground-contact constraints along
//! the rollout, and solves a dense inequality-constrained QP for the step.
//! A backtracking line search on an l1 exact-penalty merit function makes
//! iterates monotone, and input bounds are enforced as hard QP rows so
//! every candidate sequence stays inside the actuator box.
//!
//! Constraints per horizon step: the wheel must stay loaded (h1 < 0) and
//! the required tangential force must stay inside the friction cone
//! (h2 < 0), both evaluated through the analytical contact estimator. If
//! the linearized constraint set is empty the QP is re-solved with slack
//! variables and a large linear penalty; the solution status then reports
//! that feasibility was bought with slack, which callers treat as a signal
//! to fall back to a safe controller.

pub mod qp;

use crate::contact::constraint_values;
use crate::dynamics::{state_derivative, ControlInput, RobotParams, State};
use crate::math::{dot, norm_inf, DMat};
// With `std` linked (tests), inherent f64 methods shadow this shim.
#[allow(unused_imports)]
use crate::math::FloatExt;
use qp::{solve_qp, QpStatus};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MpcConfig {
    /// Horizon length in control periods.
    pub n_h: usize,
    /// Control period (s), also the internal integration step.
    pub dt: f64,
    /// Diagonal state tracking weights on [phi, theta, phi_dot, theta_dot].
    pub q: [f64; 4],
    /// Diagonal input weights on [u_m, f_t].
    pub r: [f64; 2],
    /// Lower input bounds [u_m, f_t].
    pub u_min: [f64; 2],
    /// Upper input bounds [u_m, f_t].
    pub u_max: [f64; 2],
    /// Margin added inside the contact constraints; positive values keep a
    /// reserve before the cone boundary.
    pub cone_margin: f64,
    /// Levenberg-style diagonal added to the Gauss-Newton Hessian.
    pub reg: f64,
    /// Linear penalty on constraint slack in the relaxed QP.
    pub slack_weight: f64,
    pub max_iters: usize,
}

impl Default for MpcConfig {
    fn default() -> MpcConfig {
        MpcConfig {
            n_h: 10,
            dt: 0.005,
            q: [10.0, 10_000.0, 5.0, 25.0],
            r: [5.0, 0.5],
            u_min: [-1.0, 0.0],
            u_max: [1.0, 21.6],
            cone_margin: 0.0,
            reg: 1e-6,
            slack_weight: 1e6,
            max_iters: 30,
        }
    }
}

impl MpcConfig {
    /// Default weights with the input box taken from the robot's actuator
    /// limits.
    pub fn for_robot(p: &RobotParams) -> MpcConfig {
        MpcConfig {
            u_max: [1.0, p.f_t_max],
            ..MpcConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_h == 0 {
            return Err("horizon must have at least one step".into());
        }
        if !(self.dt > 0.0) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if self.q.iter().any(|w| !(*w >= 0.0)) || self.r.iter().any(|w| !(*w >= 0.0)) {
            return Err("cost weights must be non-negative".into());
        }
        // Equal bounds are allowed: they pin a channel, which is how a
        // disabled actuator is expressed.
        for i in 0..2 {
            if !(self.u_min[i] <= self.u_max[i]) {
                return Err(format!(
                    "input bounds must be ordered, got [{}, {}]",
                    self.u_min[i], self.u_max[i]
                ));
            }
        }
        if !(self.reg > 0.0) || !(self.slack_weight > 0.0) {
            return Err("regularization and slack weight must be positive".into());
        }
        if self.max_iters == 0 {
            return Err("max_iters must be at least one".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SqpStatus {
    /// Step size and constraint violation both below tolerance.
    Converged,
    /// Iteration budget exhausted before the convergence test passed.
    MaxIters,
    /// The returned sequence still violates a contact constraint; the QP
    /// needed slack to produce a step. Callers should not trust this input
    /// beyond its first element, if at all.
    InfeasibleRelaxed,
}

#[derive(Clone, Debug)]
pub struct MpcSolution {
    /// Optimized input sequence, clamped to the actuator box.
    pub u_seq: Vec<ControlInput>,
    /// Model rollout under `u_seq`, length `n_h + 1` including the initial
    /// state.
    pub x_pred: Vec<State>,
    /// Tracking cost of the returned sequence.
    pub cost: f64,
    /// Largest positive margin-adjusted constraint value along the rollout;
    /// zero when every step satisfies both contact constraints.
    pub max_constraint_violation: f64,
    pub iters: usize,
    pub status: SqpStatus,
    /// Per-iteration `[before, after]` values of the exact-penalty merit
    /// function, both under that iteration's penalty weight. The line
    /// search only accepts steps with `after <= before`.
    pub merit_history: Vec<[f64; 2]>,
}

/// Violation above which a solution is reported as infeasible-relaxed.
const FEAS_TOL: f64 = 1e-6;
/// Infinity-norm of the QP step below which the SQP stops.
const STEP_TOL: f64 = 1e-8;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 20;
/// Quadratic weight keeping the slack block of the relaxed QP positive
/// definite.
const SLACK_QUAD: f64 = 1e-3;

/// One explicit Euler step of the reduced model.
pub fn euler_step(x: &State, u: &ControlInput, dt: f64, p: &RobotParams) -> State {
    let dx = state_derivative(x, u, p);
    x.step(dx, dt)
}

/// Rolls the model forward over the horizon; returns `n_h + 1` states.
pub fn rollout(x0: &State, u_seq: &[ControlInput], dt: f64, p: &RobotParams) -> Vec<State> {
    let mut xs = Vec::with_capacity(u_seq.len() + 1);
    xs.push(*x0);
    for u in u_seq {
        let next = euler_step(xs.last().unwrap(), u, dt, p);
        xs.push(next);
    }
    xs
}

/// Tracking cost of a rollout: weighted squared state error against the
/// reference at steps 1..n_h plus weighted squared input effort.
pub fn trajectory_cost(
    xs: &[State],
    refs: &[State],
    u_seq: &[ControlInput],
    cfg: &MpcConfig,
) -> f64 {
    let mut j = 0.0;
    for k in 0..u_seq.len() {
        let e = sub(&xs[k + 1].to_array(), &refs[k].to_array());
        for i in 0..4 {
            j += cfg.q[i] * e[i] * e[i];
        }
        let u = [u_seq[k].u_m, u_seq[k].f_t];
        for i in 0..2 {
            j += cfg.r[i] * u[i] * u[i];
        }
    }
    j
}

/// Margin-adjusted contact constraint values [h1, h2] at one step; both
/// must be negative for a valid no-slip contact.
fn constraint_pair(x: &State, u: &ControlInput, cfg: &MpcConfig, p: &RobotParams) -> [f64; 2] {
    let h = constraint_values(x, u, p)
        .expect("contact solve failed: robot parameters admit no contact force at this pose");
    [h.h1 + cfg.cone_margin, h.h2 + cfg.cone_margin]
}

/// Sum of positive constraint parts along a rollout (l1 violation) and the
/// largest single violation.
fn violation_stats(
    xs: &[State],
    u_seq: &[ControlInput],
    cfg: &MpcConfig,
    p: &RobotParams,
) -> (f64, f64) {
    let mut l1 = 0.0;
    let mut max_v = 0.0;
    for k in 0..u_seq.len() {
        let h = constraint_pair(&xs[k], &u_seq[k], cfg, p);
        for v in h {
            if v > 0.0 {
                l1 += v;
                if v > max_v {
                    max_v = v;
                }
            }
        }
    }
    (l1, max_v)
}

fn sub(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

/// Central finite differences of the continuous dynamics, scaled into the
/// discrete transition x_{k+1} = A x_k + B u_k about the rollout point.
fn linearize_dynamics(
    x: &State,
    u: &ControlInput,
    dt: f64,
    p: &RobotParams,
) -> ([[f64; 4]; 4], [[f64; 4]; 2]) {
    let mut a = [[0.0; 4]; 4];
    let xa = x.to_array();
    for j in 0..4 {
        let step = 1e-6 * (1.0 + xa[j].abs());
        let mut hi = xa;
        let mut lo = xa;
        hi[j] += step;
        lo[j] -= step;
        let fh = state_derivative(&State::from_array(hi), u, p);
        let fl = state_derivative(&State::from_array(lo), u, p);
        for i in 0..4 {
            a[i][j] = dt * (fh[i] - fl[i]) / (2.0 * step);
        }
        a[j][j] += 1.0;
    }
    let mut b = [[0.0; 4]; 2];
    let ua = [u.u_m, u.f_t];
    for j in 0..2 {
        let step = 1e-6 * (1.0 + ua[j].abs());
        let mut hi = ua;
        let mut lo = ua;
        hi[j] += step;
        lo[j] -= step;
        let fh = state_derivative(x, &ControlInput::new(hi[0], hi[1]), p);
        let fl = state_derivative(x, &ControlInput::new(lo[0], lo[1]), p);
        for i in 0..4 {
            b[j][i] = dt * (fh[i] - fl[i]) / (2.0 * step);
        }
    }
    (a, b)
}

/// Central finite differences of the margin-adjusted constraints with
/// respect to state and input.
fn linearize_constraints(
    x: &State,
    u: &ControlInput,
    cfg: &MpcConfig,
    p: &RobotParams,
) -> ([f64; 2], [[f64; 4]; 2], [[f64; 2]; 2]) {
    let h0 = constraint_pair(x, u, cfg, p);
    let xa = x.to_array();
    let mut hx = [[0.0; 4]; 2];
    for j in 0..4 {
        let step = 1e-6 * (1.0 + xa[j].abs());
        let mut hi = xa;
        let mut lo = xa;
        hi[j] += step;
        lo[j] -= step;
        let fh = constraint_pair(&State::from_array(hi), u, cfg, p);
        let fl = constraint_pair(&State::from_array(lo), u, cfg, p);
        for i in 0..2 {
            hx[i][j] = (fh[i] - fl[i]) / (2.0 * step);
        }
    }
    let ua = [u.u_m, u.f_t];
    let mut hu = [[0.0; 2]; 2];
    for j in 0..2 {
        let step = 1e-6 * (1.0 + ua[j].abs());
        let fh = constraint_pair(
            x,
            &ControlInput::new(
                ua[0] + if j == 0 { step } else { 0.0 },
                ua[1] + if j == 1 { step } else { 0.0 },
            ),
            cfg,
            p,
        );
        let fl = constraint_pair(
            x,
            &ControlInput::new(
                ua[0] - if j == 0 { step } else { 0.0 },
                ua[1] - if j == 1 { step } else { 0.0 },
            ),
            cfg,
            p,
        );
        for i in 0..2 {
            hu[i][j] = (fh[i] - fl[i]) / (2.0 * step);
        }
    }
    (h0, hx, hu)
}

/// Gauss-Newton data for one SQP iteration.
struct Linearization {
    /// Residual vector of the least-squares cost, length 6 n_h.
    res: Vec<f64>,
    /// Jacobian of the residuals with respect to the stacked inputs.
    jac: DMat,
    /// Constraint rows in `A dU >= b` form (cone rows only).
    cone_rows: DMat,
    cone_rhs: Vec<f64>,
}

fn linearize(
    xs: &[State],
    u_seq: &[ControlInput],
    refs: &[State],
    cfg: &MpcConfig,
    p: &RobotParams,
) -> Linearization {
    let n_h = u_seq.len();
    let n_u = 2 * n_h;
    let sq: [f64; 4] = core::array::from_fn(|i| cfg.q[i].sqrt());
    let sr: [f64; 2] = core::array::from_fn(|i| cfg.r[i].sqrt());

    let mut res = vec![0.0; 6 * n_h];
    let mut jac = DMat::zeros(6 * n_h, n_u);
    let mut cone_rows = DMat::zeros(2 * n_h, n_u);
    let mut cone_rhs = vec![0.0; 2 * n_h];

    // Sensitivity of the current state to the stacked inputs, propagated
    // forward along the rollout. s has 4 rows and n_u columns.
    let mut s = DMat::zeros(4, n_u);
    for k in 0..n_h {
        // Constraints are evaluated at (x_k, u_k), so they use s before the
        // step update.
        let (h0, hx, hu) = linearize_constraints(&xs[k], &u_seq[k], cfg, p);
        for c in 0..2 {
            let row = 2 * k + c;
            for col in 0..n_u {
                let mut acc = 0.0;
                for i in 0..4 {
                    acc += hx[c][i] * s.at(i, col);
                }
                *cone_rows.at_mut(row, col) = -acc;
            }
            *cone_rows.at_mut(row, 2 * k) -= hu[c][0];
            *cone_rows.at_mut(row, 2 * k + 1) -= hu[c][1];
            cone_rhs[row] = h0[c];
        }

        let (a, b) = linearize_dynamics(&xs[k], &u_seq[k], cfg.dt, p);
        let mut s_next = DMat::zeros(4, n_u);
        for i in 0..4 {
            for col in 0..n_u {
                let mut acc = 0.0;
                for m in 0..4 {
                    acc += a[i][m] * s.at(m, col);
                }
                *s_next.at_mut(i, col) = acc;
            }
            *s_next.at_mut(i, 2 * k) += b[0][i];
            *s_next.at_mut(i, 2 * k + 1) += b[1][i];
        }
        s = s_next;

        // State tracking residuals at x_{k+1}.
        let e = sub(&xs[k + 1].to_array(), &refs[k].to_array());
        for i in 0..4 {
            let row = 4 * k + i;
            res[row] = sq[i] * e[i];
            for col in 0..n_u {
                *jac.at_mut(row, col) = sq[i] * s.at(i, col);
            }
        }
        // Input effort residuals at u_k.
        let u = [u_seq[k].u_m, u_seq[k].f_t];
        for i in 0..2 {
            let row = 4 * n_h + 2 * k + i;
            res[row] = sr[i] * u[i];
            *jac.at_mut(row, 2 * k + i) = sr[i];
        }
    }

    Linearization {
        res,
        jac,
        cone_rows,
        cone_rhs,
    }
}

/// Assembles bound rows `dU >= u_min - u` and `-dU >= u - u_max` for the
/// stacked input step.
fn bound_rows(u_seq: &[ControlInput], cfg: &MpcConfig) -> (DMat, Vec<f64>) {
    let n_u = 2 * u_seq.len();
    let mut rows = DMat::zeros(2 * n_u, n_u);
    let mut rhs = vec![0.0; 2 * n_u];
    for k in 0..u_seq.len() {
        let u = [u_seq[k].u_m, u_seq[k].f_t];
        for i in 0..2 {
            let col = 2 * k + i;
            *rows.at_mut(col, col) = 1.0;
            rhs[col] = cfg.u_min[i] - u[i];
            *rows.at_mut(n_u + col, col) = -1.0;
            rhs[n_u + col] = u[i] - cfg.u_max[i];
        }
    }
    (rows, rhs)
}

struct QpStep {
    du: Vec<f64>,
    max_multiplier: f64,
    /// Largest slack used by the relaxed QP; zero when the strict QP was
    /// feasible.
    slack: f64,
}

/// Solves the SQP subproblem, falling back to a slack-relaxed QP when the
/// linearized constraint set is empty.
fn solve_subproblem(lin: &Linearization, u_seq: &[ControlInput], cfg: &MpcConfig) -> QpStep {
    let n_u = 2 * u_seq.len();
    let n_c = lin.cone_rhs.len();

    // Gauss-Newton Hessian 2 J'J + reg I and gradient 2 J' res.
    let mut h = DMat::zeros(n_u, n_u);
    for i in 0..n_u {
        for j in 0..=i {
            let mut acc = 0.0;
            for r in 0..lin.res.len() {
                acc += lin.jac.at(r, i) * lin.jac.at(r, j);
            }
            *h.at_mut(i, j) = 2.0 * acc;
            *h.at_mut(j, i) = 2.0 * acc;
        }
        *h.at_mut(i, i) += cfg.reg;
    }
    let mut g = vec![0.0; n_u];
    lin.jac.matvec_transpose_add(&lin.res, &mut g);
    for v in g.iter_mut() {
        *v *= 2.0;
    }

    let (b_rows, b_rhs) = bound_rows(u_seq, cfg);
    let m = n_c + b_rows.rows;
    let mut a_mat = DMat::zeros(m, n_u);
    let mut b = vec![0.0; m];
    for r in 0..n_c {
        a_mat.data[r * n_u..(r + 1) * n_u].copy_from_slice(lin.cone_rows.row(r));
        b[r] = lin.cone_rhs[r];
    }
    for r in 0..b_rows.rows {
        a_mat.data[(n_c + r) * n_u..(n_c + r + 1) * n_u].copy_from_slice(b_rows.row(r));
        b[n_c + r] = b_rhs[r];
    }

    let strict = solve_qp(&h, &g, &a_mat, &b);
    if strict.status == QpStatus::Optimal {
        return QpStep {
            du: strict.x,
            max_multiplier: norm_inf(&strict.lambda),
            slack: 0.0,
        };
    }

    // Relaxed subproblem: one slack per cone row, heavily penalized, so a
    // step exists even when the linearized cone is empty. Bound rows stay
    // hard.
    let n_ext = n_u + n_c;
    let mut h_ext = DMat::zeros(n_ext, n_ext);
    for i in 0..n_u {
        for j in 0..n_u {
            *h_ext.at_mut(i, j) = h.at(i, j);
        }
    }
    for i in 0..n_c {
        *h_ext.at_mut(n_u + i, n_u + i) = SLACK_QUAD;
    }
    let mut g_ext = vec![0.0; n_ext];
    g_ext[..n_u].copy_from_slice(&g);
    for v in g_ext[n_u..].iter_mut() {
        *v = cfg.slack_weight;
    }
    let m_ext = m + n_c;
    let mut a_ext = DMat::zeros(m_ext, n_ext);
    let mut b_ext = vec![0.0; m_ext];
    for r in 0..n_c {
        a_ext.data[r * n_ext..r * n_ext + n_u].copy_from_slice(lin.cone_rows.row(r));
        *a_ext.at_mut(r, n_u + r) = 1.0;
        b_ext[r] = lin.cone_rhs[r];
    }
    for r in 0..b_rows.rows {
        a_ext.data[(n_c + r) * n_ext..(n_c + r) * n_ext + n_u].copy_from_slice(b_rows.row(r));
        b_ext[n_c + r] = b_rhs[r];
    }
    for i in 0..n_c {
        *a_ext.at_mut(m + i, n_u + i) = 1.0;
    }
    let relaxed = solve_qp(&h_ext, &g_ext, &a_ext, &b_ext);
    let slack = norm_inf(&relaxed.x[n_u..]);
    QpStep {
        du: relaxed.x[..n_u].to_vec(),
        max_multiplier: norm_inf(&relaxed.lambda),
        slack,
    }
}

/// Clamps to the actuator box and snaps values within rounding distance of
/// a bound onto it, so saturated inputs compare equal to the bound. The
/// snap window covers the residue a step smaller than `STEP_TOL` can leave
/// behind, which is what separates a saturated input from an interior one.
fn clamp_snap(v: f64, lo: f64, hi: f64) -> f64 {
    let c = v.clamp(lo, hi);
    let span = hi - lo;
    let window = 10.0 * STEP_TOL * span.max(1.0);
    if c - lo < window {
        lo
    } else if hi - c < window {
        hi
    } else {
        c
    }
}

fn apply_step(u_seq: &[ControlInput], du: &[f64], alpha: f64, cfg: &MpcConfig) -> Vec<ControlInput> {
    u_seq
        .iter()
        .enumerate()
        .map(|(k, u)| {
            ControlInput::new(
                clamp_snap(u.u_m + alpha * du[2 * k], cfg.u_min[0], cfg.u_max[0]),
                clamp_snap(u.f_t + alpha * du[2 * k + 1], cfg.u_min[1], cfg.u_max[1]),
            )
        })
        .collect()
}

/// Solves the receding-horizon problem from `x0`. `refs` holds the target
/// state for each of the `n_h` steps ahead; `warm_start` seeds the input
/// sequence and is clamped to the actuator box before use.
pub fn solve_mpc(
    x0: &State,
    refs: &[State],
    warm_start: &[ControlInput],
    cfg: &MpcConfig,
    p: &RobotParams,
) -> MpcSolution {
    assert_eq!(refs.len(), cfg.n_h, "one reference state per horizon step");
    assert_eq!(warm_start.len(), cfg.n_h, "warm start must span the horizon");

    let mut u_seq = apply_step(warm_start, &vec![0.0; 2 * cfg.n_h], 0.0, cfg);
    let mut xs = rollout(x0, &u_seq, cfg.dt, p);
    let mut cost = trajectory_cost(&xs, refs, &u_seq, cfg);
    let (mut viol_l1, _) = violation_stats(&xs, &u_seq, cfg, p);
    let mut nu: f64 = 10.0;
    let mut iters = 0;
    let mut converged = false;
    let mut last_slack = 0.0;
    let mut merit_history = Vec::new();

    while iters < cfg.max_iters {
        iters += 1;
        let lin = linearize(&xs, &u_seq, refs, cfg, p);
        let step = solve_subproblem(&lin, &u_seq, cfg);
        last_slack = step.slack;

        if norm_inf(&step.du) < STEP_TOL {
            converged = viol_l1 <= FEAS_TOL;
            break;
        }

        // Exact-penalty weight must dominate the multipliers for the merit
        // function to accept constraint-restoring steps.
        nu = nu.max(2.0 * (step.max_multiplier + 1.0));

        let mut grad = vec![0.0; 2 * cfg.n_h];
        lin.jac.matvec_transpose_add(&lin.res, &mut grad);
        let descent = 2.0 * dot(&grad, &step.du) - nu * viol_l1;
        let merit0 = cost + nu * viol_l1;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_BACKTRACKS {
            let trial_u = apply_step(&u_seq, &step.du, alpha, cfg);
            let trial_xs = rollout(x0, &trial_u, cfg.dt, p);
            let trial_cost = trajectory_cost(&trial_xs, refs, &trial_u, cfg);
            let (trial_l1, _) = violation_stats(&trial_xs, &trial_u, cfg, p);
            let trial_merit = trial_cost + nu * trial_l1;
            if trial_merit <= merit0 + ARMIJO_C1 * alpha * descent.min(0.0) {
                merit_history.push([merit0, trial_merit]);
                u_seq = trial_u;
                xs = trial_xs;
                cost = trial_cost;
                viol_l1 = trial_l1;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No acceptable step along this direction; report the current
            // iterate rather than loop on a stalled search.
            converged = viol_l1 <= FEAS_TOL && norm_inf(&step.du) < 1e-4;
            break;
        }
    }
    if iters == cfg.max_iters && !converged {
        // The loop may have exited by budget with a small final step.
        let lin = linearize(&xs, &u_seq, refs, cfg, p);
        let step = solve_subproblem(&lin, &u_seq, cfg);
        last_slack = step.slack;
        if norm_inf(&step.du) < STEP_TOL {
            converged = viol_l1 <= FEAS_TOL;
        }
    }

    let (_, max_viol) = violation_stats(&xs, &u_seq, cfg, p);
    let status = if max_viol > FEAS_TOL || last_slack > FEAS_TOL {
        SqpStatus::InfeasibleRelaxed
    } else if converged {
        SqpStatus::Converged
    } else {
        SqpStatus::MaxIters
    };

    MpcSolution {
        u_seq,
        x_pred: xs,
        cost,
        max_constraint_violation: max_viol,
        iters,
        status,
        merit_history,
    }
}

/// Gradient of the tracking cost with respect to the stacked input vector
/// `[u_m0, f_t0, u_m1, f_t1, ...]`, from the same forward-sensitivity chain
/// the solver uses. Exposed so the chain rule can be validated against
/// finite differences of [`trajectory_cost`].
pub fn cost_gradient(
    x0: &State,
    refs: &[State],
    u_seq: &[ControlInput],
    cfg: &MpcConfig,
    p: &RobotParams,
) -> Vec<f64> {
    let xs = rollout(x0, u_seq, cfg.dt, p);
    let lin = linearize(&xs, u_seq, refs, cfg, p);
    let mut grad = vec![0.0; 2 * u_seq.len()];
    lin.jac.matvec_transpose_add(&lin.res, &mut grad);
    for v in grad.iter_mut() {
        *v *= 2.0;
    }
    grad
}

/// Advances a warm-start sequence by one control period: drops the first
/// input and repeats the last.
pub fn shift_warm_start(u_seq: &mut Vec<ControlInput>) {
    if u_seq.len() > 1 {
        u_seq.rotate_left(1);
        let last = u_seq[u_seq.len() - 2];
        *u_seq.last_mut().unwrap() = last;
    }
}
