//! Gain-sweep harness for the cascaded PID baseline.
//!
//! Runs the reduced model closed loop (RK4 plant substeps, zero-order-hold
//! control at 5 ms) through three exercises per gain set: recover a 0.1 rad
//! lean on flat ground, ramp to a cruise speed on flat ground, and hold the
//! standstill trim on a 15 degree incline. Prints one summary line per gain
//! set; run with `cargo run -p mip-core --example tune --release`.

use mip_core::control::{equilibrium_pitch, PidController, PidGains};
use mip_core::dynamics::{state_derivative, ControlInput, RobotParams, State};

fn rk4_step(x: &State, u: &ControlInput, dt: f64, p: &RobotParams) -> State {
    let k1 = state_derivative(x, u, p);
    let k2 = state_derivative(&x.step(k1, dt * 0.5), u, p);
    let k3 = state_derivative(&x.step(k2, dt * 0.5), u, p);
    let k4 = state_derivative(&x.step(k3, dt), u, p);
    let dx = [
        (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0,
        (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0,
        (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]) / 6.0,
        (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]) / 6.0,
    ];
    x.step(dx, dt)
}

struct RunStats {
    max_abs_theta: f64,
    end_theta: f64,
    end_phi_dot: f64,
    diverged: bool,
}

fn run(
    p: &RobotParams,
    gains: PidGains,
    x0: State,
    reference: impl Fn(f64) -> State,
    t_end: f64,
    trace: bool,
) -> RunStats {
    let dt = 0.005;
    let mut pid = PidController::new(gains);
    let mut x = x0;
    let mut stats = RunStats {
        max_abs_theta: 0.0,
        end_theta: 0.0,
        end_phi_dot: 0.0,
        diverged: false,
    };
    let steps = (t_end / dt) as usize;
    for k in 0..steps {
        let t = k as f64 * dt;
        let r = reference(t);
        let u = pid.step(&x, &r, dt);
        if trace && k % 40 == 0 {
            println!(
                "  t={t:5.2} theta={:+8.4} phi_dot={:+8.3} u={:+6.3} (ref v={:+5.2})",
                x.theta, x.phi_dot, u.u_m, r.phi_dot
            );
        }
        for _ in 0..5 {
            x = rk4_step(&x, &u, dt / 5.0, p);
        }
        stats.max_abs_theta = stats.max_abs_theta.max(x.theta.abs());
        if !x.theta.is_finite() || x.theta.abs() > 1.5 {
            stats.diverged = true;
            break;
        }
    }
    stats.end_theta = x.theta;
    stats.end_phi_dot = x.phi_dot;
    stats
}

fn main() {
    let flat = RobotParams::default();
    let incline15 = RobotParams {
        beta: 15f64.to_radians(),
        ..RobotParams::default()
    };
    let incline45 = RobotParams {
        beta: 45f64.to_radians(),
        ..RobotParams::default()
    };
    let te_flat = equilibrium_pitch(0.0, &flat).unwrap();
    let te15 = equilibrium_pitch(0.0, &incline15).unwrap();
    let f_alloc = 21.0;
    let te45 = equilibrium_pitch(f_alloc, &incline45).unwrap();
    let verbose = std::env::args().any(|a| a == "--trace");
    let _ = verbose;

    let mut best: Vec<(f64, String)> = Vec::new();
    for kp in [-4.0, -8.0, -12.0, -20.0, -30.0] {
        for kd in [-0.4, -0.8, -1.6, -3.0] {
            for ki_f in [0.0, 0.5, 1.0] {
                for kv in [-0.002, -0.005, -0.01, -0.02, -0.05] {
                    for kvi_f in [0.0, 0.2, 0.5] {
                        let g = PidGains {
                            kp,
                            ki: kp * ki_f,
                            kd,
                            kv,
                            kvi: kv * kvi_f,
                            pitch_cmd_limit: 0.3,
                            integral_clamp: 0.4,
                            vel_integral_clamp: 0.1,
                        };
                        // Flat: recover a 0.1 rad lean and settle.
                        let o1 = run(
                            &flat,
                            g,
                            State::new(0.0, te_flat + 0.1, 0.0, 0.0),
                            |_| State::new(0.0, te_flat, 0.0, 0.0),
                            4.0,
                            false,
                        );
                        if o1.diverged
                            || (o1.end_theta - te_flat).abs() > 0.01
                            || o1.end_phi_dot.abs() > 1.0
                        {
                            continue;
                        }
                        // 15 degree: hold trim from trim.
                        let o2 = run(
                            &incline15,
                            g,
                            State::new(0.0, te15, 0.0, 0.0),
                            |_| State::new(0.0, te15, 0.0, 0.0),
                            4.0,
                            false,
                        );
                        if o2.diverged
                            || (o2.end_theta - te15).abs() > 0.01
                            || o2.end_phi_dot.abs() > 1.0
                        {
                            continue;
                        }
                        // 45 degree with pinned thrust: hold trim.
                        let o3 = run_thrust(
                            &incline45,
                            g,
                            State::new(0.0, te45, 0.0, 0.0),
                            |_| State::new(0.0, te45, 0.0, 0.0),
                            4.0,
                            f_alloc,
                        );
                        if o3.diverged
                            || (o3.end_theta - te45).abs() > 0.02
                            || o3.end_phi_dot.abs() > 1.5
                        {
                            continue;
                        }
                        let score = o1.max_abs_theta
                            + 2.0 * (o1.end_theta - te_flat).abs()
                            + 2.0 * (o3.end_theta - te45).abs()
                            + 0.1 * o1.end_phi_dot.abs()
                            + 0.1 * o3.end_phi_dot.abs();
                        best.push((
                            score,
                            format!(
                                "kp={kp} ki={} kd={kd} kv={kv} kvi={} | flat max={:.3} end_pd={:.2} | 45 end_th_err={:.4} end_pd={:.2}",
                                g.ki, g.kvi, o1.max_abs_theta, o1.end_phi_dot,
                                (o3.end_theta - te45).abs(), o3.end_phi_dot
                            ),
                        ));
                    }
                }
            }
        }
    }
    best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    println!("{} gain sets pass; best 25:", best.len());
    for (sc, desc) in best.iter().take(25) {
        println!("  score={sc:.4} {desc}");
    }
}

/// Same closed loop but with the thrust channel held at a fixed allocation.
fn run_thrust(
    p: &RobotParams,
    gains: PidGains,
    x0: State,
    reference: impl Fn(f64) -> State,
    t_end: f64,
    f_t: f64,
) -> RunStats {
    let dt = 0.005;
    let mut pid = PidController::new(gains);
    let mut x = x0;
    let mut stats = RunStats {
        max_abs_theta: 0.0,
        end_theta: 0.0,
        end_phi_dot: 0.0,
        diverged: false,
    };
    let steps = (t_end / dt) as usize;
    for k in 0..steps {
        let t = k as f64 * dt;
        let r = reference(t);
        let mut u = pid.step(&x, &r, dt);
        u.f_t = f_t;
        for _ in 0..5 {
            x = rk4_step(&x, &u, dt / 5.0, p);
        }
        stats.max_abs_theta = stats.max_abs_theta.max((x.theta - r.theta).abs());
        if !x.theta.is_finite() || (x.theta - r.theta).abs() > 1.2 {
            stats.diverged = true;
            break;
        }
    }
    stats.end_theta = x.theta;
    stats.end_phi_dot = x.phi_dot;
    stats
}
