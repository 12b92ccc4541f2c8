//! Dense convex quadratic programming by the dual active-set method.
//!
//! Solves
//!
//! ```text
//!   minimize   0.5 x' H x + g' x
//!   subject to A x >= b
//! ```
//!
//! with `H` symmetric positive definite. The solver starts from the
//! unconstrained minimizer, which is dual feasible, and adds the most
//! violated constraint one at a time, dropping active constraints whose
//! multiplier would go negative. Every intermediate iterate stays optimal
//! for its active set, so the method needs no feasible starting point and
//! detects an empty feasible region directly.
//!
//! Step directions come from a fresh factorization of the KKT system
//!
//! ```text
//!   [ H  N ] [ z ]   [ n+ ]
//!   [ N' 0 ] [ r ] = [ 0  ]
//! ```
//!
//! where `N` collects the active constraint normals and `n+` is the normal
//! being added. Problems here are small (tens of variables), so the cubic
//! cost per step is irrelevant next to the clarity of one linear solve.

use crate::math::{dot, lu_factor, lu_solve, DMat};
// With `std` linked (tests), inherent f64 methods shadow this shim.
#[allow(unused_imports)]
use crate::math::FloatExt as _;

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    /// The constraints admit no point; reported when a violated constraint
    /// has a normal orthogonal to every remaining direction of movement and
    /// no active multiplier can give way.
    Infeasible,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct QpResult {
    pub x: Vec<f64>,
    /// One multiplier per constraint row, nonzero only on active rows.
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub status: QpStatus,
}

/// Tolerance below which a constraint violation is accepted as satisfied.
const FEAS_TOL: f64 = 1e-10;
/// Tolerance below which the projected step direction counts as zero.
const STEP_TOL: f64 = 1e-12;
/// Relative threshold on `z . n+` below which the incoming normal counts as
/// dependent on the active set. Without this guard a normal at a glancing
/// angle to the active subspace produces a huge, ill-conditioned primal
/// step and then a numerically singular KKT system once activated.
const DEP_TOL: f64 = 1e-9;

/// Minimizes `0.5 x' H x + g' x` subject to `A x >= b`. Rows of `a_mat` are
/// the constraint normals. `H` must be symmetric positive definite.
pub fn solve_qp(h: &DMat, g: &[f64], a_mat: &DMat, b: &[f64]) -> QpResult {
    let n = h.rows;
    assert_eq!(h.cols, n);
    assert_eq!(g.len(), n);
    let m = a_mat.rows;
    assert_eq!(a_mat.cols.max(n), n);
    assert_eq!(b.len(), m);

    let mut x = unconstrained_minimum(h, g);
    let mut lambda = vec![0.0; m];
    let mut active: Vec<usize> = Vec::new();
    let mut iterations = 0;
    // Each outer pass adds one constraint and each inner pass drops at most
    // one, so this bound is generous.
    let max_iter = 20 * (m + 2) * (n + 2);

    loop {
        // Most violated constraint at the current iterate.
        let mut worst = None;
        let mut worst_v = -FEAS_TOL;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let v = dot(a_mat.row(i), &x) - b[i];
            if v < worst_v {
                worst_v = v;
                worst = Some(i);
            }
        }
        let s = match worst {
            None => {
                return QpResult {
                    x,
                    lambda,
                    iterations,
                    status: QpStatus::Optimal,
                }
            }
            Some(i) => i,
        };
        let n_plus = a_mat.row(s).to_vec();
        let mut lambda_s = 0.0;

        // Inner loop: take dual steps, dropping blockers, until constraint
        // `s` is satisfied or shown unreachable.
        loop {
            iterations += 1;
            if iterations > max_iter {
                return QpResult {
                    x,
                    lambda,
                    iterations,
                    status: QpStatus::IterationLimit,
                };
            }

            let Some((z, r)) = kkt_step(h, a_mat, &active, &n_plus) else {
                // The active-set normals have become numerically dependent;
                // no further progress is possible on this working set.
                return QpResult {
                    x,
                    lambda,
                    iterations,
                    status: QpStatus::Infeasible,
                };
            };
            let ztn = dot(&z, &n_plus);
            // Accept the primal direction only if `n+` has a genuinely
            // independent component: `ztn` must clear both an absolute floor
            // and a relative one against |z||n+|. A glancing-angle normal
            // otherwise yields a near-infinite step and a singular KKT
            // system after activation.
            let primal_ok = ztn > STEP_TOL
                && ztn > DEP_TOL * dot(&z, &z).sqrt() * dot(&n_plus, &n_plus).sqrt();

            // Dual blocking step: smallest ratio over active constraints
            // whose multiplier decreases along this direction.
            let mut t1 = f64::INFINITY;
            let mut blocker = None;
            for (j, &idx) in active.iter().enumerate() {
                if r[j] > STEP_TOL {
                    let ratio = lambda[idx] / r[j];
                    if ratio < t1 {
                        t1 = ratio;
                        blocker = Some(j);
                    }
                }
            }

            // Primal step length to make constraint `s` hold with equality.
            let viol = b[s] - dot(&n_plus, &x);
            let t2 = if primal_ok {
                viol / ztn
            } else {
                f64::INFINITY
            };

            let t = t1.min(t2);
            if !t.is_finite() {
                // No direction reduces the violation and no active
                // constraint can be released.
                return QpResult {
                    x,
                    lambda,
                    iterations,
                    status: QpStatus::Infeasible,
                };
            }

            if primal_ok {
                for k in 0..n {
                    x[k] += t * z[k];
                }
            }
            for (j, &idx) in active.iter().enumerate() {
                lambda[idx] -= t * r[j];
            }
            lambda_s += t;

            if t2 <= t1 {
                lambda[s] = lambda_s;
                active.push(s);
                break;
            }
            let j = blocker.expect("finite t1 implies a blocking constraint");
            lambda[active[j]] = 0.0;
            active.swap_remove(j);
        }
    }
}

fn unconstrained_minimum(h: &DMat, g: &[f64]) -> Vec<f64> {
    let n = h.rows;
    let mut lu = h.data.clone();
    let mut piv = vec![0usize; n];
    let ok = lu_factor(&mut lu, n, &mut piv);
    assert!(ok, "QP Hessian must be nonsingular");
    let mut x: Vec<f64> = g.iter().map(|v| -v).collect();
    lu_solve(&lu, n, &piv, &mut x);
    x
}

/// Solves the KKT system for the step direction `z` in primal space and the
/// rates `r` at which active multipliers change. Returns `None` when the
/// system is singular, i.e. the active normals are numerically dependent.
fn kkt_step(
    h: &DMat,
    a_mat: &DMat,
    active: &[usize],
    n_plus: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = h.rows;
    let q = active.len();
    let dim = n + q;
    let mut kkt = vec![0.0; dim * dim];
    for i in 0..n {
        for j in 0..n {
            kkt[i * dim + j] = h.at(i, j);
        }
    }
    for (col, &idx) in active.iter().enumerate() {
        let normal = a_mat.row(idx);
        for i in 0..n {
            kkt[i * dim + (n + col)] = normal[i];
            kkt[(n + col) * dim + i] = normal[i];
        }
    }
    let mut piv = vec![0usize; dim];
    if !lu_factor(&mut kkt, dim, &mut piv) {
        return None;
    }
    let mut rhs = vec![0.0; dim];
    rhs[..n].copy_from_slice(n_plus);
    lu_solve(&kkt, dim, &piv, &mut rhs);
    let z = rhs[..n].to_vec();
    let r = rhs[n..].to_vec();
    Some((z, r))
}
