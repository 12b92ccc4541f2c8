//! Summary metrics computed from a trajectory log.
//!
//! The same function serves the in-process run report and the `metrics`
//! subcommand recomputing from CSV, so the two can be compared for exact
//! equality.

use crate::csvlog::Row;

/// Slip speed above which a crossing counts as one slip event (m/s).
pub const SLIP_SPEED_THRESHOLD: f64 = 0.01;

pub const METRICS_SCHEMA: &str = "mip-metrics-v1";

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub steps: usize,
    pub rms_err_phi: f64,
    pub rms_err_theta: f64,
    pub rms_err_phi_dot: f64,
    pub rms_err_theta_dot: f64,
    /// Largest signed constraint values seen; negative means the margin
    /// held everywhere.
    pub max_h1_model: Option<f64>,
    pub max_h2_model: Option<f64>,
    pub max_h1_sim: Option<f64>,
    pub max_h2_sim: Option<f64>,
    /// Rows where a model constraint was positive.
    pub model_constraint_violations: usize,
    /// Rows where the predictive solver ran (telemetry present).
    pub solver_runs: usize,
    /// Rows where the solver reported infeasible-relaxed and the PID
    /// action was applied instead.
    pub infeasible_solves: usize,
    pub controller_switches: usize,
    pub cost_mean: Option<f64>,
    pub cost_max: Option<f64>,
    pub cost_final: Option<f64>,
    pub solve_ms_mean: Option<f64>,
    pub solve_ms_max: Option<f64>,
    /// Rising-edge count of |v_slip| through the threshold; absent when
    /// the log has no simulator channel.
    pub slip_events: Option<usize>,
    pub max_abs_v_slip: Option<f64>,
    pub max_penetration: Option<f64>,
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn fold_max(acc: Option<f64>, v: Option<f64>) -> Option<f64> {
    match (acc, v) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (None, b) => b,
        (a, None) => a,
    }
}

pub fn compute(rows: &[Row]) -> RunMetrics {
    let mut m = RunMetrics {
        steps: rows.len(),
        rms_err_phi: rms(rows.iter().map(|r| r.x.phi - r.reference.phi)),
        rms_err_theta: rms(rows.iter().map(|r| r.x.theta - r.reference.theta)),
        rms_err_phi_dot: rms(rows.iter().map(|r| r.x.phi_dot - r.reference.phi_dot)),
        rms_err_theta_dot: rms(rows.iter().map(|r| r.x.theta_dot - r.reference.theta_dot)),
        max_h1_model: None,
        max_h2_model: None,
        max_h1_sim: None,
        max_h2_sim: None,
        model_constraint_violations: 0,
        solver_runs: 0,
        infeasible_solves: 0,
        controller_switches: 0,
        cost_mean: None,
        cost_max: None,
        cost_final: None,
        solve_ms_mean: None,
        solve_ms_max: None,
        slip_events: None,
        max_abs_v_slip: None,
        max_penetration: None,
    };

    let mut cost_sum = 0.0;
    let mut cost_n = 0usize;
    let mut ms_sum = 0.0;
    let mut ms_n = 0usize;
    let mut slip_events = 0usize;
    let mut any_slip_channel = false;
    let mut slipping = false;

    for (i, r) in rows.iter().enumerate() {
        m.max_h1_model = fold_max(m.max_h1_model, r.h1_model);
        m.max_h2_model = fold_max(m.max_h2_model, r.h2_model);
        m.max_h1_sim = fold_max(m.max_h1_sim, r.h1_sim);
        m.max_h2_sim = fold_max(m.max_h2_sim, r.h2_sim);
        if r.h1_model.map_or(false, |h| h > 0.0) || r.h2_model.map_or(false, |h| h > 0.0) {
            m.model_constraint_violations += 1;
        }
        if r.solver_status.is_some() {
            m.solver_runs += 1;
        }
        if r.solver_status.as_deref() == Some("infeasible_relaxed") {
            m.infeasible_solves += 1;
        }
        if i > 0 && rows[i - 1].active != r.active {
            m.controller_switches += 1;
        }
        if let Some(j) = r.cost {
            cost_sum += j;
            cost_n += 1;
            m.cost_max = fold_max(m.cost_max, Some(j));
            m.cost_final = Some(j);
        }
        if let Some(ms) = r.solve_ms {
            ms_sum += ms;
            ms_n += 1;
            m.solve_ms_max = fold_max(m.solve_ms_max, Some(ms));
        }
        if let Some(v) = r.v_slip {
            any_slip_channel = true;
            m.max_abs_v_slip = fold_max(m.max_abs_v_slip, Some(v.abs()));
            let above = v.abs() > SLIP_SPEED_THRESHOLD;
            if above && !slipping {
                slip_events += 1;
            }
            slipping = above;
        }
        m.max_penetration = fold_max(m.max_penetration, r.penetration);
    }

    if cost_n > 0 {
        m.cost_mean = Some(cost_sum / cost_n as f64);
    }
    if ms_n > 0 {
        m.solve_ms_mean = Some(ms_sum / ms_n as f64);
    }
    if any_slip_channel {
        m.slip_events = Some(slip_events);
    }
    m
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

/// Canonical `key = value` rendering written to `metrics.txt`. Recomputing
/// from the CSV and formatting again must reproduce the file byte for
/// byte, except for the wall-clock lines, which depend on the run.
pub fn format_metrics(m: &RunMetrics) -> String {
    format!(
        "schema = {METRICS_SCHEMA}\n\
         steps = {}\n\
         rms_err_phi = {}\n\
         rms_err_theta = {}\n\
         rms_err_phi_dot = {}\n\
         rms_err_theta_dot = {}\n\
         max_h1_model = {}\n\
         max_h2_model = {}\n\
         max_h1_sim = {}\n\
         max_h2_sim = {}\n\
         model_constraint_violations = {}\n\
         solver_runs = {}\n\
         infeasible_solves = {}\n\
         controller_switches = {}\n\
         cost_mean = {}\n\
         cost_max = {}\n\
         cost_final = {}\n\
         solve_ms_mean = {}\n\
         solve_ms_max = {}\n\
         slip_events = {}\n\
         max_abs_v_slip = {}\n\
         max_penetration = {}\n",
        m.steps,
        m.rms_err_phi,
        m.rms_err_theta,
        m.rms_err_phi_dot,
        m.rms_err_theta_dot,
        fmt_opt_f64(m.max_h1_model),
        fmt_opt_f64(m.max_h2_model),
        fmt_opt_f64(m.max_h1_sim),
        fmt_opt_f64(m.max_h2_sim),
        m.model_constraint_violations,
        m.solver_runs,
        m.infeasible_solves,
        m.controller_switches,
        fmt_opt_f64(m.cost_mean),
        fmt_opt_f64(m.cost_max),
        fmt_opt_f64(m.cost_final),
        fmt_opt_f64(m.solve_ms_mean),
        fmt_opt_f64(m.solve_ms_max),
        fmt_opt_usize(m.slip_events),
        fmt_opt_f64(m.max_abs_v_slip),
        fmt_opt_f64(m.max_penetration),
    )
}

/// The wall-clock lines vary between runs of the same scenario; strip
/// them when comparing metrics for determinism.
pub fn strip_walltime_lines(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with("solve_ms_"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use mip_core::dynamics::{ControlInput, State};

    fn base_row(t: f64) -> Row {
        Row {
            t,
            x: State::new(1.0, 0.1, 0.0, 0.0),
            reference: State::default(),
            u: ControlInput::ZERO,
            h1_model: Some(-10.0),
            h2_model: Some(-100.0),
            h1_sim: None,
            h2_sim: None,
            cost: None,
            solver_status: None,
            solve_ms: None,
            active: "pid".into(),
            fgx_model: Some(0.0),
            fgn_model: Some(10.0),
            fgx_sim: None,
            fgn_sim: None,
            v_slip: None,
            penetration: None,
        }
    }

    #[test]
    fn counts_switches_fallbacks_and_slip_edges() {
        let mut rows = vec![base_row(0.0), base_row(0.005), base_row(0.01)];
        rows[1].active = "mpc".into();
        rows[1].solver_status = Some("converged".into());
        rows[1].cost = Some(5.0);
        rows[2].active = "pid".into();
        rows[2].solver_status = Some("infeasible_relaxed".into());
        rows[2].cost = Some(9.0);
        rows[0].v_slip = Some(0.0);
        rows[1].v_slip = Some(0.02);
        rows[2].v_slip = Some(0.005);
        let m = compute(&rows);
        assert_eq!(m.controller_switches, 2);
        assert_eq!(m.solver_runs, 2);
        assert_eq!(m.infeasible_solves, 1);
        assert_eq!(m.slip_events, Some(1));
        assert_eq!(m.cost_mean, Some(7.0));
        assert_eq!(m.cost_final, Some(9.0));
    }

    #[test]
    fn rms_errors_use_references() {
        let rows = vec![base_row(0.0)];
        let m = compute(&rows);
        assert_eq!(m.rms_err_phi, 1.0);
        assert!((m.rms_err_theta - 0.1).abs() < 1e-15);
    }

    #[test]
    fn formatting_is_stable_and_walltime_strippable() {
        let mut rows = vec![base_row(0.0)];
        rows[0].solve_ms = Some(0.25);
        rows[0].solver_status = Some("converged".into());
        let text = format_metrics(&compute(&rows));
        assert!(text.starts_with("schema = mip-metrics-v1\n"));
        assert!(text.contains("solve_ms_mean = 0.25"));
        let stripped = strip_walltime_lines(&text);
        assert!(!stripped.contains("solve_ms"));
        assert!(stripped.contains("steps = 1"));
    }
}
