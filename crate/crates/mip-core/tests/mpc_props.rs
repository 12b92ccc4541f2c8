//! Optimizer validation: gradient chain rule against finite differences,
//! and the full SQP against an independent damped Gauss-Newton solver on
//! an instance whose optimum lies strictly inside all constraints.

use mip_core::dynamics::{state_derivative, ControlInput, RobotParams, State};
use mip_core::mpc::{
    cost_gradient, rollout, solve_mpc, trajectory_cost, MpcConfig, SqpStatus,
};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hold_refs(n_h: usize) -> Vec<State> {
    vec![State::default(); n_h]
}

fn zero_warm(n_h: usize) -> Vec<ControlInput> {
    vec![ControlInput::ZERO; n_h]
}

fn unflatten(uvec: &[f64]) -> Vec<ControlInput> {
    uvec.chunks(2).map(|c| ControlInput::new(c[0], c[1])).collect()
}

/// Residual vector of the tracking problem, rebuilt locally: explicit
/// Euler rollout and square-root weights, nothing shared with the
/// solver's linearization machinery.
fn oracle_residuals(
    x0: &State,
    refs: &[State],
    uvec: &[f64],
    cfg: &MpcConfig,
    p: &RobotParams,
) -> Vec<f64> {
    let mut x = *x0;
    let mut res = Vec::with_capacity(6 * refs.len());
    for (k, r) in refs.iter().enumerate() {
        let u = ControlInput::new(uvec[2 * k], uvec[2 * k + 1]);
        let dx = state_derivative(&x, &u, p);
        x = x.step(dx, cfg.dt);
        let xa = x.to_array();
        let ra = r.to_array();
        for i in 0..4 {
            res.push(cfg.q[i].sqrt() * (xa[i] - ra[i]));
        }
        res.push(cfg.r[0].sqrt() * u.u_m);
        res.push(cfg.r[1].sqrt() * u.f_t);
    }
    res
}

fn oracle_cost(x0: &State, refs: &[State], uvec: &[f64], cfg: &MpcConfig, p: &RobotParams) -> f64 {
    oracle_residuals(x0, refs, uvec, cfg, p)
        .iter()
        .map(|r| r * r)
        .sum()
}

/// Dense linear solve by Gaussian elimination with partial pivoting,
/// local to the oracle so it shares no code with the library.
fn gaussian_solve(a: &mut Vec<Vec<f64>>, b: &mut Vec<f64>) -> bool {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return false;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * b[k];
        }
        b[col] = s / a[col][col];
    }
    true
}

/// Levenberg-Marquardt on the unconstrained tracking problem. Jacobians by
/// central differences of the oracle residual vector.
fn levenberg_marquardt(
    x0: &State,
    refs: &[State],
    cfg: &MpcConfig,
    p: &RobotParams,
) -> (Vec<f64>, f64) {
    let n = 2 * refs.len();
    let mut u = vec![0.0; n];
    let mut cost = oracle_cost(x0, refs, &u, cfg, p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let m = 6 * refs.len();
        let mut jac = vec![vec![0.0; n]; m];
        for j in 0..n {
            let h = 1e-7 * (1.0 + u[j].abs());
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += h;
            dn[j] -= h;
            let rp = oracle_residuals(x0, refs, &up, cfg, p);
            let rn = oracle_residuals(x0, refs, &dn, cfg, p);
            for i in 0..m {
                jac[i][j] = (rp[i] - rn[i]) / (2.0 * h);
            }
        }
        let res = oracle_residuals(x0, refs, &u, cfg, p);
        let mut done = false;
        loop {
            let mut a = vec![vec![0.0; n]; n];
            let mut b = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    a[i][j] = (0..m).map(|k| jac[k][i] * jac[k][j]).sum();
                }
                a[i][i] += lambda;
                b[i] = -(0..m).map(|k| jac[k][i] * res[k]).sum::<f64>();
            }
            assert!(gaussian_solve(&mut a, &mut b), "normal equations singular");
            let trial: Vec<f64> = u.iter().zip(&b).map(|(ui, d)| ui + d).collect();
            let trial_cost = oracle_cost(x0, refs, &trial, cfg, p);
            if trial_cost <= cost {
                let step = b.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
                u = trial;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                if step < 1e-11 {
                    done = true;
                }
                break;
            }
            lambda *= 5.0;
            if lambda > 1e10 {
                done = true;
                break;
            }
        }
        if done {
            break;
        }
    }
    (u, cost)
}

#[test]
fn gradient_matches_finite_differences() {
    let p = RobotParams::default();
    let cfg = MpcConfig::for_robot(&p);
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d);
    for _ in 0..20 {
        let x0 = State::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.4..0.4),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let u_seq: Vec<ControlInput> = (0..cfg.n_h)
            .map(|_| ControlInput::new(rng.gen_range(-0.8..0.8), rng.gen_range(0.0..15.0)))
            .collect();
        let refs = hold_refs(cfg.n_h);
        let grad = cost_gradient(&x0, &refs, &u_seq, &cfg, &p);

        let mut uvec: Vec<f64> = Vec::new();
        for u in &u_seq {
            uvec.push(u.u_m);
            uvec.push(u.f_t);
        }
        for j in 0..uvec.len() {
            let h = 1e-6 * (1.0 + uvec[j].abs());
            let mut up = uvec.clone();
            let mut dn = uvec.clone();
            up[j] += h;
            dn[j] -= h;
            let cost_at = |v: &[f64]| {
                let us = unflatten(v);
                let xs = rollout(&x0, &us, cfg.dt, &p);
                trajectory_cost(&xs, &refs, &us, &cfg)
            };
            let fd = (cost_at(&up) - cost_at(&dn)) / (2.0 * h);
            assert!(
                (grad[j] - fd).abs() < 1e-5 * (1.0 + grad[j].abs()),
                "gradient entry {j}: chain {} vs finite difference {}",
                grad[j],
                fd
            );
        }
    }
}

#[test]
fn interior_optimum_matches_independent_gauss_newton() {
    // Friction loosened and the actuator box widened so that nothing is
    // active at the optimum; on that instance the SQP must land on the
    // same unconstrained minimum as the oracle.
    let p = RobotParams {
        mu_s: 50.0,
        ..RobotParams::default()
    };
    let cfg = MpcConfig {
        n_h: 8,
        u_min: [-10.0, -30.0],
        u_max: [10.0, 30.0],
        max_iters: 60,
        ..MpcConfig::default()
    };
    let x0 = State::new(0.0, 0.04, 0.0, 0.1);
    let refs = hold_refs(cfg.n_h);

    let sol = solve_mpc(&x0, &refs, &zero_warm(cfg.n_h), &cfg, &p);
    assert_eq!(sol.status, SqpStatus::Converged);
    assert_eq!(sol.max_constraint_violation, 0.0);
    for u in &sol.u_seq {
        assert!(u.u_m.abs() < 9.0 && u.f_t.abs() < 29.0, "optimum not interior");
    }

    let (_, lm_cost) = levenberg_marquardt(&x0, &refs, &cfg, &p);
    let gap = (sol.cost - lm_cost).abs();
    println!("sqp cost {:.12}, oracle cost {lm_cost:.12}, gap {gap:.3e}", sol.cost);
    assert!(gap < 1e-6, "cost gap {gap:.3e} against the oracle");
}

#[test]
fn merit_never_rises_within_an_accepted_iteration() {
    let p = RobotParams::default();
    let cfg = MpcConfig::for_robot(&p);
    let refs = hold_refs(cfg.n_h);
    let starts = [
        State::new(0.0, 0.3, 0.0, 2.0),
        State::new(0.0, -0.25, 3.0, -1.0),
        State::new(0.0, 0.1, 0.0, 8.0),
        State::new(2.0, -0.1, -4.0, 0.5),
    ];
    for x0 in starts {
        let sol = solve_mpc(&x0, &refs, &zero_warm(cfg.n_h), &cfg, &p);
        assert!(!sol.merit_history.is_empty(), "no iterations recorded");
        for (i, pair) in sol.merit_history.iter().enumerate() {
            assert!(
                pair[1] <= pair[0] + 1e-9 * (1.0 + pair[0].abs()),
                "merit rose at iteration {i}: {} -> {} from {x0:?}",
                pair[0],
                pair[1]
            );
        }
    }
}

#[test]
fn active_bounds_are_met_exactly() {
    // Loose cone plus a prohibitive thrust weight force the motor channel
    // onto its rail; saturated entries must sit exactly on the bound.
    let p = RobotParams {
        mu_s: 5.0,
        ..RobotParams::default()
    };
    let cfg = MpcConfig {
        q: [0.0, 50_000.0, 0.0, 10.0],
        r: [0.01, 1e6],
        ..MpcConfig::for_robot(&p)
    };
    let refs = hold_refs(cfg.n_h);
    let mut saturated = 0;
    for (theta0, theta_dot0) in [(0.4, 1.0), (0.5, -1.0), (0.6, 1.0), (-0.5, -1.5)] {
        let x0 = State::new(0.0, theta0, 0.0, theta_dot0);
        let sol = solve_mpc(&x0, &refs, &zero_warm(cfg.n_h), &cfg, &p);
        for u in &sol.u_seq {
            assert!(u.u_m >= cfg.u_min[0] && u.u_m <= cfg.u_max[0]);
            assert!(u.f_t >= cfg.u_min[1] && u.f_t <= cfg.u_max[1]);
            for (v, lo, hi) in [
                (u.u_m, cfg.u_min[0], cfg.u_max[0]),
                (u.f_t, cfg.u_min[1], cfg.u_max[1]),
            ] {
                let window = 1e-7 * (hi - lo).max(1.0);
                let near_rail = (v - lo).abs() < window || (v - hi).abs() < window;
                if near_rail {
                    assert!(
                        v == lo || v == hi,
                        "input {v} hovers near a bound without landing on it"
                    );
                    saturated += 1;
                }
            }
        }
    }
    assert!(saturated > 0, "scenario failed to drive any input onto a rail");
}

#[test]
fn reported_solution_is_internally_consistent() {
    let p = RobotParams::default();
    let cfg = MpcConfig::for_robot(&p);
    let refs = hold_refs(cfg.n_h);
    let mut rng = ChaCha8Rng::seed_from_u64(0x77);
    for _ in 0..10 {
        let x0 = State::new(
            0.0,
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        let sol = solve_mpc(&x0, &refs, &zero_warm(cfg.n_h), &cfg, &p);
        let xs = rollout(&x0, &sol.u_seq, cfg.dt, &p);
        assert_eq!(xs.len(), sol.x_pred.len());
        for (a, b) in xs.iter().zip(&sol.x_pred) {
            for (va, vb) in a.to_array().iter().zip(b.to_array().iter()) {
                assert!((va - vb).abs() <= 1e-12 * (1.0 + va.abs()));
            }
        }
        let cost = trajectory_cost(&xs, &refs, &sol.u_seq, &cfg);
        assert!((cost - sol.cost).abs() <= 1e-9 * (1.0 + cost.abs()));
        if sol.status == SqpStatus::Converged {
            assert!(sol.max_constraint_violation <= 1e-6);
        }
    }
}

#[test]
fn warm_started_solves_stay_fast() {
    let p = RobotParams::default();
    let cfg = MpcConfig::for_robot(&p);
    let refs = hold_refs(cfg.n_h);
    let mut x = State::new(0.0, 0.12, 0.0, 0.0);
    let mut warm = zero_warm(cfg.n_h);
    let mut total = std::time::Duration::ZERO;
    let mut timed = 0u32;
    for step in 0..60 {
        let t0 = std::time::Instant::now();
        let sol = solve_mpc(&x, &refs, &warm, &cfg, &p);
        let dt = t0.elapsed();
        if step >= 10 {
            total += dt;
            timed += 1;
        }
        let u = sol.u_seq[0];
        x = mip_core::mpc::euler_step(&x, &u, cfg.dt, &p);
        warm = sol.u_seq.clone();
        mip_core::mpc::shift_warm_start(&mut warm);
    }
    let mean = total / timed;
    println!("mean warm-started solve time: {mean:?}");
    assert!(mean.as_secs_f64() < 0.05, "mean solve {mean:?} exceeds 50 ms");
}
