//! Trajectory CSV schema, writer, and reader.
//!
//! One row per control period. Columns that do not apply to a given row
//! (simulator channels under the reduced plant, solver telemetry under
//! PID) are empty strings. Floats are written with Rust's shortest
//! round-trip formatting, so reading a file back reproduces bit-identical
//! values.

use mip_core::dynamics::{ControlInput, State};
use mip_core::mpc::SqpStatus;

use anyhow::{bail, Context, Result};
use std::path::Path;

/// Schema tag written as the first line of every trajectory file.
pub const SCHEMA: &str = "mip-trajectory-v1";

/// Column order; stable within a schema version.
pub const COLUMNS: [&str; 25] = [
    "t",
    "phi",
    "theta",
    "phi_dot",
    "theta_dot",
    "phi_ref",
    "theta_ref",
    "phi_dot_ref",
    "theta_dot_ref",
    "u_m",
    "f_t",
    "h1_model",
    "h2_model",
    "h1_sim",
    "h2_sim",
    "J",
    "solver_status",
    "solve_ms",
    "active_controller",
    "fgx_model",
    "fgn_model",
    "fgx_sim",
    "fgn_sim",
    "v_slip",
    "penetration",
];

/// Index of the wall-clock column, the one field excluded from
/// determinism comparisons.
pub const SOLVE_MS_COLUMN: usize = 17;

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub t: f64,
    pub x: State,
    pub reference: State,
    pub u: ControlInput,
    pub h1_model: Option<f64>,
    pub h2_model: Option<f64>,
    pub h1_sim: Option<f64>,
    pub h2_sim: Option<f64>,
    pub cost: Option<f64>,
    pub solver_status: Option<String>,
    pub solve_ms: Option<f64>,
    pub active: String,
    pub fgx_model: Option<f64>,
    pub fgn_model: Option<f64>,
    pub fgx_sim: Option<f64>,
    pub fgn_sim: Option<f64>,
    pub v_slip: Option<f64>,
    pub penetration: Option<f64>,
}

pub fn status_label(status: SqpStatus) -> &'static str {
    match status {
        SqpStatus::Converged => "converged",
        SqpStatus::MaxIters => "max_iters",
        SqpStatus::InfeasibleRelaxed => "infeasible_relaxed",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

pub fn format_rows(rows: &[Row]) -> String {
    let mut out = String::with_capacity(rows.len() * 160 + 256);
    out.push_str(&format!("# schema: {SCHEMA}\n"));
    out.push_str(&COLUMNS.join(","));
    out.push('\n');
    for r in rows {
        let fields = [
            format!("{}", r.t),
            format!("{}", r.x.phi),
            format!("{}", r.x.theta),
            format!("{}", r.x.phi_dot),
            format!("{}", r.x.theta_dot),
            format!("{}", r.reference.phi),
            format!("{}", r.reference.theta),
            format!("{}", r.reference.phi_dot),
            format!("{}", r.reference.theta_dot),
            format!("{}", r.u.u_m),
            format!("{}", r.u.f_t),
            fmt_opt(r.h1_model),
            fmt_opt(r.h2_model),
            fmt_opt(r.h1_sim),
            fmt_opt(r.h2_sim),
            fmt_opt(r.cost),
            r.solver_status.clone().unwrap_or_default(),
            fmt_opt(r.solve_ms),
            r.active.clone(),
            fmt_opt(r.fgx_model),
            fmt_opt(r.fgn_model),
            fmt_opt(r.fgx_sim),
            fmt_opt(r.fgn_sim),
            fmt_opt(r.v_slip),
            fmt_opt(r.penetration),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    std::fs::write(path, format_rows(rows))
        .with_context(|| format!("writing trajectory {}", path.display()))
}

fn parse_opt(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .with_context(|| format!("bad {what} value '{field}'"))
}

fn parse_req(field: &str, what: &str) -> Result<f64> {
    parse_opt(field, what)?.with_context(|| format!("missing required {what}"))
}

pub fn parse_rows(text: &str) -> Result<Vec<Row>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == format!("# schema: {SCHEMA}") => {}
        Some(first) => bail!("unexpected schema line '{first}'"),
        None => bail!("empty trajectory file"),
    }
    match lines.next() {
        Some(header) if header == COLUMNS.join(",") => {}
        Some(header) => bail!("unexpected header '{header}'"),
        None => bail!("missing header row"),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != COLUMNS.len() {
            bail!(
                "row {}: expected {} fields, got {}",
                idx + 1,
                COLUMNS.len(),
                fields.len()
            );
        }
        rows.push(Row {
            t: parse_req(fields[0], "t")?,
            x: State {
                phi: parse_req(fields[1], "phi")?,
                theta: parse_req(fields[2], "theta")?,
                phi_dot: parse_req(fields[3], "phi_dot")?,
                theta_dot: parse_req(fields[4], "theta_dot")?,
            },
            reference: State {
                phi: parse_req(fields[5], "phi_ref")?,
                theta: parse_req(fields[6], "theta_ref")?,
                phi_dot: parse_req(fields[7], "phi_dot_ref")?,
                theta_dot: parse_req(fields[8], "theta_dot_ref")?,
            },
            u: ControlInput {
                u_m: parse_req(fields[9], "u_m")?,
                f_t: parse_req(fields[10], "f_t")?,
            },
            h1_model: parse_opt(fields[11], "h1_model")?,
            h2_model: parse_opt(fields[12], "h2_model")?,
            h1_sim: parse_opt(fields[13], "h1_sim")?,
            h2_sim: parse_opt(fields[14], "h2_sim")?,
            cost: parse_opt(fields[15], "J")?,
            solver_status: if fields[16].is_empty() {
                None
            } else {
                Some(fields[16].to_string())
            },
            solve_ms: parse_opt(fields[17], "solve_ms")?,
            active: fields[18].to_string(),
            fgx_model: parse_opt(fields[19], "fgx_model")?,
            fgn_model: parse_opt(fields[20], "fgn_model")?,
            fgx_sim: parse_opt(fields[21], "fgx_sim")?,
            fgn_sim: parse_opt(fields[22], "fgn_sim")?,
            v_slip: parse_opt(fields[23], "v_slip")?,
            penetration: parse_opt(fields[24], "penetration")?,
        });
    }
    Ok(rows)
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading trajectory {}", path.display()))?;
    parse_rows(&text).with_context(|| format!("in {}", path.display()))
}

/// Byte-level equality of two trajectory files with the wall-clock column
/// masked out; everything else, including formatting, must match exactly.
pub fn identical_except_walltime(a: &str, b: &str) -> bool {
    let la: Vec<&str> = a.lines().collect();
    let lb: Vec<&str> = b.lines().collect();
    if la.len() != lb.len() {
        return false;
    }
    for (x, y) in la.iter().zip(&lb) {
        if x.starts_with('#') || *x == COLUMNS.join(",") {
            if x != y {
                return false;
            }
            continue;
        }
        let fx: Vec<&str> = x.split(',').collect();
        let fy: Vec<&str> = y.split(',').collect();
        if fx.len() != fy.len() {
            return false;
        }
        for (i, (a_field, b_field)) in fx.iter().zip(&fy).enumerate() {
            if i != SOLVE_MS_COLUMN && a_field != b_field {
                return false;
            }
        }
    }
    true
}
