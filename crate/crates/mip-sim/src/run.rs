//! Closed-loop scenario execution and artifact writing.
//!
//! One run produces a directory with the trajectory log, a metrics
//! summary, a self-contained snapshot of the resolved scenario, and a set
//! of per-panel CSV extracts for plotting.

use crate::csvlog::{self, Row};
use crate::metrics::{self, RunMetrics};
use crate::scenario::{Plant, Scenario};

use mip_core::contact::solve_contact_forces;
use mip_core::control::Scheduler;
use mip_core::dynamics::{state_derivative, ControlInput, RobotParams, State};
use mip_core::truth::{FreeState, TruthSim};

use anyhow::{Context, Result};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Reason a run stopped before `t_end`.
#[derive(Clone, Debug)]
pub enum Abort {
    /// The optimizer returned a non-finite cost or input.
    SolverFatal { t: f64, detail: String },
    /// The truth plant left its validity envelope.
    NonPhysical { t: f64, detail: String },
}

impl Abort {
    pub fn exit_code(&self) -> i32 {
        match self {
            Abort::SolverFatal { .. } => 2,
            Abort::NonPhysical { .. } => 3,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Abort::SolverFatal { t, detail } => {
                format!("solver failure at t = {t:.4} s: {detail}")
            }
            Abort::NonPhysical { t, detail } => {
                format!("nonphysical plant state at t = {t:.4} s: {detail}")
            }
        }
    }
}

pub struct RunReport {
    pub rows: Vec<Row>,
    pub metrics: RunMetrics,
    pub out_dir: PathBuf,
    /// Set when the run stopped early. Artifacts cover the completed steps.
    pub abort: Option<Abort>,
}

/// Integrates the reduced plant over one control period with fixed
/// substeps so the log is independent of wall-clock conditions.
const REDUCED_SUBSTEPS: usize = 5;

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

enum PlantState {
    Reduced(State),
    Compliant(TruthSim),
}

impl PlantState {
    fn reduced_view(&self) -> State {
        match self {
            PlantState::Reduced(x) => *x,
            PlantState::Compliant(sim) => sim.state.to_reduced(),
        }
    }

    fn advance(&mut self, u: &ControlInput, dt: f64, p: &RobotParams) -> Result<(), String> {
        match self {
            PlantState::Reduced(x) => {
                let h = dt / REDUCED_SUBSTEPS as f64;
                for _ in 0..REDUCED_SUBSTEPS {
                    *x = rk4_step(x, u, h, p);
                }
                if x.to_array().iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err("non-finite reduced state".into())
                }
            }
            PlantState::Compliant(sim) => sim.advance(u, dt).map_err(|e| e.to_string()),
        }
    }
}

/// Executes the closed loop and writes every artifact into `out_dir`,
/// creating it if needed. Early aborts still produce the artifacts for
/// the steps that ran; the abort reason is reported in the result rather
/// than as an error so partial data stays inspectable.
pub fn run_scenario(sc: &Scenario, out_dir: &Path) -> Result<RunReport> {
    let steps = (sc.t_end / sc.control_dt).round() as usize;
    let plan = sc.reference_plan();
    let mut scheduler = Scheduler::new(
        sc.pid.clone(),
        sc.mpc.clone(),
        sc.scheduler.t_mpc_enable,
        sc.thrust_feedforward(),
    );
    let mut plant = match sc.plant {
        Plant::Reduced => PlantState::Reduced(sc.x0),
        Plant::Compliant => PlantState::Compliant(TruthSim::new(
            FreeState::from_reduced(&sc.x0, &sc.ground, &sc.params),
            sc.ground.clone(),
            sc.params.clone(),
        )),
    };

    let mut rows: Vec<Row> = Vec::with_capacity(steps);
    let mut abort: Option<Abort> = None;

    for k in 0..steps {
        let t = k as f64 * sc.control_dt;
        let x = plant.reduced_view();
        let reference = plan.reference(t);

        let t0 = Instant::now();
        let step = scheduler.step(t, &x, &|tt| plan.reference(tt), &sc.params);
        let solve_ms = step
            .solution
            .as_ref()
            .map(|_| t0.elapsed().as_secs_f64() * 1e3);

        if let Some(sol) = &step.solution {
            let finite_u = sol.u_seq.iter().all(|u| u.u_m.is_finite() && u.f_t.is_finite());
            if !sol.cost.is_finite() || !finite_u {
                abort = Some(Abort::SolverFatal {
                    t,
                    detail: "non-finite optimizer output".into(),
                });
            }
        }

        // Model-side contact channels for the applied input. The solve can
        // fail only inside the singular-pitch band fallback; the row then
        // leaves the channels empty rather than aborting the run.
        let (h_model, fg_model) = match solve_contact_forces(&x, &step.u, &sc.params) {
            Ok(f) => {
                let h = mip_core::contact::noslip_constraints(&f, &sc.params);
                (Some([h.h1, h.h2]), Some([f.f_gx, f.f_gn]))
            }
            Err(_) => (None, None),
        };

        // Simulator-side channels are sampled before advancing so they
        // describe the same instant as the state columns.
        let sim_channels = match &plant {
            PlantState::Compliant(sim) => {
                let c = sim.contact();
                let h2 = c.f_gx * c.f_gx - (sc.params.mu_s * c.f_gn) * (sc.params.mu_s * c.f_gn);
                Some((c, h2))
            }
            PlantState::Reduced(_) => None,
        };

        rows.push(Row {
            t,
            x,
            reference,
            u: step.u,
            h1_model: h_model.map(|h| h[0]),
            h2_model: h_model.map(|h| h[1]),
            h1_sim: sim_channels.map(|(c, _)| -c.f_gn),
            h2_sim: sim_channels.map(|(_, h2)| h2),
            cost: step.solution.as_ref().map(|s| s.cost),
            solver_status: step
                .solution
                .as_ref()
                .map(|s| csvlog::status_label(s.status).to_string()),
            solve_ms,
            active: step.active.label().to_string(),
            fgx_model: fg_model.map(|f| f[0]),
            fgn_model: fg_model.map(|f| f[1]),
            fgx_sim: sim_channels.map(|(c, _)| c.f_gx),
            fgn_sim: sim_channels.map(|(c, _)| c.f_gn),
            v_slip: sim_channels.map(|(c, _)| c.v_slip),
            penetration: sim_channels.map(|(c, _)| c.penetration),
        });

        if abort.is_some() {
            break;
        }
        if let Err(detail) = plant.advance(&step.u, sc.control_dt, &sc.params) {
            abort = Some(Abort::NonPhysical { t, detail });
            break;
        }
    }

    let report = RunReport {
        metrics: metrics::compute(&rows),
        rows,
        out_dir: out_dir.to_path_buf(),
        abort,
    };
    write_artifacts(sc, &report)?;
    Ok(report)
}

fn write_artifacts(sc: &Scenario, report: &RunReport) -> Result<()> {
    let dir = &report.out_dir;
    fs::create_dir_all(dir)
        .with_context(|| format!("creating run directory {}", dir.display()))?;
    csvlog::write_rows(&dir.join("trajectory.csv"), &report.rows)?;
    fs::write(dir.join("metrics.txt"), metrics::format_metrics(&report.metrics))
        .context("writing metrics.txt")?;
    fs::write(dir.join("scenario.resolved.ini"), sc.resolved_ini())
        .context("writing scenario.resolved.ini")?;

    let plots = dir.join("plots");
    fs::create_dir_all(&plots).context("creating plots directory")?;
    write_panel(
        &plots.join("states.csv"),
        &["t", "phi", "theta", "phi_dot", "theta_dot", "phi_ref", "theta_ref"],
        &report.rows,
        |r| {
            vec![
                Some(r.t),
                Some(r.x.phi),
                Some(r.x.theta),
                Some(r.x.phi_dot),
                Some(r.x.theta_dot),
                Some(r.reference.phi),
                Some(r.reference.theta),
            ]
        },
    )?;
    write_panel(
        &plots.join("inputs.csv"),
        &["t", "u_m", "f_t"],
        &report.rows,
        |r| vec![Some(r.t), Some(r.u.u_m), Some(r.u.f_t)],
    )?;
    write_panel(
        &plots.join("constraints.csv"),
        &["t", "h1_model", "h2_model", "h1_sim", "h2_sim", "v_slip"],
        &report.rows,
        |r| vec![Some(r.t), r.h1_model, r.h2_model, r.h1_sim, r.h2_sim, r.v_slip],
    )?;
    write_panel(&plots.join("cost.csv"), &["t", "J"], &report.rows, |r| {
        vec![Some(r.t), r.cost]
    })?;
    Ok(())
}

fn write_panel(
    path: &Path,
    header: &[&str],
    rows: &[Row],
    extract: impl Fn(&Row) -> Vec<Option<f64>>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        let fields: Vec<String> = extract(r)
            .into_iter()
            .map(|v| v.map(|x| format!("{x}")).unwrap_or_default())
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Output directory for a scenario: explicit flag, then the scenario's
/// own setting, then `runs/<name>` under the current directory.
pub fn resolve_out_dir(sc: &Scenario, cli_out: Option<&Path>) -> PathBuf {
    if let Some(d) = cli_out {
        return d.to_path_buf();
    }
    if let Some(d) = &sc.out_dir {
        return d.clone();
    }
    PathBuf::from("runs").join(&sc.name)
}
