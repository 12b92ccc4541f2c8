//! Sectioned scenario files and their resolution into a fully typed,
//! self-contained run configuration.
//!
//! Format: INI-style `[section]` headers with `key = value` lines, `#` or
//! `;` comments, no nesting. Recognized sections: `[scenario]`,
//! `[params]`, `[ground]`, `[mpc]`, `[pid]`, `[reference]`,
//! `[scheduler]`. Unknown sections or keys are errors so a typo cannot
//! silently fall back to a default. Command-line overrides take the form
//! `section.key=value` and are applied before resolution.

use crate::paramfile::{self, ParamTracking};

use mip_core::control::{equilibrium_pitch, ClimbPlan, LeanModel, PidGains};
use mip_core::dynamics::{RobotParams, State};
use mip_core::mpc::MpcConfig;
use mip_core::truth::GroundModel;

use anyhow::{anyhow, bail, Context, Result};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Plant {
    Reduced,
    Compliant,
}

impl Plant {
    pub fn label(&self) -> &'static str {
        match self {
            Plant::Reduced => "reduced",
            Plant::Compliant => "compliant",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefKind {
    Hold,
    Climb,
}

/// Reference-trajectory settings, with the trim pitch already resolved to
/// a number (the `auto` statics solve happens during resolution).
#[derive(Clone, Copy, Debug)]
pub struct ReferenceConfig {
    pub kind: RefKind,
    pub v_cruise: f64,
    pub t_ramp: f64,
    pub t_start: f64,
    pub theta_ref: f64,
    pub theta_ref_auto: bool,
    /// Thrust assumed by the statics solve behind `theta_ref = auto` (N).
    pub f_t_alloc: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SchedulerConfig {
    pub t_mpc_enable: f64,
    pub thrust_enable: bool,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub plant: Plant,
    pub t_end: f64,
    pub control_dt: f64,
    pub x0: State,
    pub theta0_auto: bool,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub params: RobotParams,
    pub ground: GroundModel,
    pub mpc: MpcConfig,
    pub pid: PidGains,
    pub reference: ReferenceConfig,
    pub scheduler: SchedulerConfig,
}

/// One parsed section: ordered key-value pairs with their line numbers.
struct RawSection {
    name: String,
    entries: Vec<(String, String, usize)>,
}

fn payload(line: &str) -> Option<&str> {
    let cut = line.split(['#', ';']).next().unwrap_or("").trim();
    if cut.is_empty() {
        None
    } else {
        Some(cut)
    }
}

fn parse_sections(text: &str) -> Result<Vec<RawSection>> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let Some(line) = payload(raw) else { continue };
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("line {lineno}: unterminated section header"))?
                .trim()
                .to_string();
            if sections.iter().any(|s| s.name == name) {
                bail!("line {lineno}: duplicate section [{name}]");
            }
            sections.push(RawSection {
                name,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {lineno}: expected 'key = value', got '{line}'"))?;
        let section = sections
            .last_mut()
            .ok_or_else(|| anyhow!("line {lineno}: key before any [section] header"))?;
        let key = key.trim().to_string();
        if section.entries.iter().any(|(k, _, _)| *k == key) {
            bail!("line {lineno}: duplicate key '{key}' in [{}]", section.name);
        }
        section
            .entries
            .push((key, value.trim().to_string(), lineno));
    }
    Ok(sections)
}

/// Applies `section.key=value` overrides, replacing existing entries or
/// appending new ones (sections included).
fn apply_overrides(sections: &mut Vec<RawSection>, overrides: &[String]) -> Result<()> {
    for ov in overrides {
        let (path, value) = ov
            .split_once('=')
            .ok_or_else(|| anyhow!("override '{ov}': expected section.key=value"))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| anyhow!("override '{ov}': expected section.key=value"))?;
        let section = section.trim();
        let key = key.trim();
        let value = value.trim();
        if !sections.iter().any(|s| s.name == section) {
            sections.push(RawSection {
                name: section.to_string(),
                entries: Vec::new(),
            });
        }
        let sec = sections.iter_mut().find(|s| s.name == section).unwrap();
        if let Some(entry) = sec.entries.iter_mut().find(|(k, _, _)| k == key) {
            entry.1 = value.to_string();
        } else {
            sec.entries.push((key.to_string(), value.to_string(), 0));
        }
    }
    Ok(())
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .with_context(|| format!("key '{key}': expected a number, got '{value}'"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("key '{key}': expected a boolean, got '{other}'"),
    }
}

fn parse_floats<const N: usize>(key: &str, value: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != N {
        bail!("key '{key}': expected {N} numbers, got '{value}'");
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(parts) {
        *slot = parse_f64(key, part)?;
    }
    Ok(out)
}

struct ScenarioHeader {
    name: Option<String>,
    plant: Plant,
    params_path: Option<PathBuf>,
    t_end: Option<f64>,
    control_dt: Option<f64>,
    phi0: f64,
    theta0: Option<f64>,
    theta0_auto: bool,
    phi_dot0: f64,
    theta_dot0: f64,
    seed: u64,
    out_dir: Option<PathBuf>,
}

fn parse_scenario_section(sec: &RawSection, base_dir: Option<&Path>) -> Result<ScenarioHeader> {
    let mut h = ScenarioHeader {
        name: None,
        plant: Plant::Compliant,
        params_path: None,
        t_end: None,
        control_dt: None,
        phi0: 0.0,
        theta0: None,
        theta0_auto: false,
        phi_dot0: 0.0,
        theta_dot0: 0.0,
        seed: 0,
        out_dir: None,
    };
    for (key, value, lineno) in &sec.entries {
        let ctx = || format!("[scenario] line {lineno}");
        match key.as_str() {
            "name" => h.name = Some(value.clone()),
            "plant" => {
                h.plant = match value.as_str() {
                    "reduced" => Plant::Reduced,
                    "compliant" => Plant::Compliant,
                    other => bail!("{}: unknown plant '{other}'", ctx()),
                }
            }
            "params" => {
                let raw = PathBuf::from(value);
                h.params_path = Some(match base_dir {
                    Some(dir) if raw.is_relative() => dir.join(raw),
                    _ => raw,
                });
            }
            "t_end" => h.t_end = Some(parse_f64(key, value).with_context(ctx)?),
            "control_dt" => h.control_dt = Some(parse_f64(key, value).with_context(ctx)?),
            "phi0" => h.phi0 = parse_f64(key, value).with_context(ctx)?,
            "theta0" => {
                if value == "auto" {
                    h.theta0_auto = true;
                } else {
                    h.theta0 = Some(parse_f64(key, value).with_context(ctx)?);
                }
            }
            "phi_dot0" => h.phi_dot0 = parse_f64(key, value).with_context(ctx)?,
            "theta_dot0" => h.theta_dot0 = parse_f64(key, value).with_context(ctx)?,
            "seed" => {
                h.seed = value
                    .parse::<u64>()
                    .with_context(|| format!("{}: seed must be an unsigned integer", ctx()))?
            }
            "out_dir" => h.out_dir = Some(PathBuf::from(value)),
            other => bail!("{}: unknown key '{other}'", ctx()),
        }
    }
    Ok(h)
}

fn parse_ground_section(sec: &RawSection) -> Result<GroundModel> {
    let mut g = GroundModel::default();
    for (key, value, lineno) in &sec.entries {
        let v = parse_f64(key, value).with_context(|| format!("[ground] line {lineno}"))?;
        match key.as_str() {
            "k_ground" => g.k_ground = v,
            "c_ground" => g.c_ground = v,
            "mu_static" => g.mu_static = v,
            "mu_coulomb" => g.mu_coulomb = v,
            "v_stribeck" => g.v_stribeck = v,
            "v_reg" => g.v_reg = v,
            "dt_physics" => g.dt_physics = v,
            "max_penetration" => g.max_penetration = v,
            other => bail!("[ground] line {lineno}: unknown key '{other}'"),
        }
    }
    Ok(g)
}

fn parse_mpc_section(sec: &RawSection, base: MpcConfig, control_dt: f64) -> Result<MpcConfig> {
    let mut m = base;
    for (key, value, lineno) in &sec.entries {
        let ctx = || format!("[mpc] line {lineno}");
        match key.as_str() {
            "n_h" => {
                m.n_h = value
                    .parse::<usize>()
                    .with_context(|| format!("{}: n_h must be a positive integer", ctx()))?
            }
            "dt" => {
                let dt = parse_f64(key, value).with_context(ctx)?;
                if (dt - control_dt).abs() > 1e-12 {
                    bail!(
                        "{}: mpc dt {dt} must equal the scenario control_dt {control_dt}",
                        ctx()
                    );
                }
            }
            "q" => m.q = parse_floats::<4>(key, value).with_context(ctx)?,
            "r" => m.r = parse_floats::<2>(key, value).with_context(ctx)?,
            "u_min" => m.u_min = parse_floats::<2>(key, value).with_context(ctx)?,
            "u_max" => m.u_max = parse_floats::<2>(key, value).with_context(ctx)?,
            "cone_margin" => m.cone_margin = parse_f64(key, value).with_context(ctx)?,
            "reg" => m.reg = parse_f64(key, value).with_context(ctx)?,
            "slack_weight" => m.slack_weight = parse_f64(key, value).with_context(ctx)?,
            "max_iters" => {
                m.max_iters = value
                    .parse::<usize>()
                    .with_context(|| format!("{}: max_iters must be a positive integer", ctx()))?
            }
            other => bail!("{}: unknown key '{other}'", ctx()),
        }
    }
    Ok(m)
}

fn parse_pid_section(sec: &RawSection) -> Result<PidGains> {
    let mut g = PidGains::default();
    for (key, value, lineno) in &sec.entries {
        let v = parse_f64(key, value).with_context(|| format!("[pid] line {lineno}"))?;
        match key.as_str() {
            "kp" => g.kp = v,
            "ki" => g.ki = v,
            "kd" => g.kd = v,
            "kv" => g.kv = v,
            "kvi" => g.kvi = v,
            "pitch_cmd_limit" => g.pitch_cmd_limit = v,
            "integral_clamp" => g.integral_clamp = v,
            "vel_integral_clamp" => g.vel_integral_clamp = v,
            other => bail!("[pid] line {lineno}: unknown key '{other}'"),
        }
    }
    Ok(g)
}

struct RawReference {
    kind: RefKind,
    v_cruise: f64,
    t_ramp: f64,
    t_start: f64,
    theta_ref: Option<f64>,
    f_t_alloc: f64,
}

fn parse_reference_section(sec: &RawSection) -> Result<RawReference> {
    let mut r = RawReference {
        kind: RefKind::Hold,
        v_cruise: 0.0,
        t_ramp: 0.0,
        t_start: 0.0,
        theta_ref: None,
        f_t_alloc: 0.0,
    };
    for (key, value, lineno) in &sec.entries {
        let ctx = || format!("[reference] line {lineno}");
        match key.as_str() {
            "type" => {
                r.kind = match value.as_str() {
                    "hold" => RefKind::Hold,
                    "climb" => RefKind::Climb,
                    other => bail!("{}: unknown reference type '{other}'", ctx()),
                }
            }
            "v_cruise" => r.v_cruise = parse_f64(key, value).with_context(ctx)?,
            "t_ramp" => r.t_ramp = parse_f64(key, value).with_context(ctx)?,
            "t_start" => r.t_start = parse_f64(key, value).with_context(ctx)?,
            "theta_ref" => {
                if value != "auto" {
                    r.theta_ref = Some(parse_f64(key, value).with_context(ctx)?);
                }
            }
            "f_t_alloc" => r.f_t_alloc = parse_f64(key, value).with_context(ctx)?,
            other => bail!("{}: unknown key '{other}'", ctx()),
        }
    }
    Ok(r)
}

fn parse_scheduler_section(sec: &RawSection) -> Result<SchedulerConfig> {
    let mut s = SchedulerConfig {
        t_mpc_enable: 0.0,
        thrust_enable: true,
    };
    for (key, value, lineno) in &sec.entries {
        let ctx = || format!("[scheduler] line {lineno}");
        match key.as_str() {
            "t_mpc_enable" => s.t_mpc_enable = parse_f64(key, value).with_context(ctx)?,
            "thrust_enable" => s.thrust_enable = parse_bool(key, value).with_context(ctx)?,
            other => bail!("{}: unknown key '{other}'", ctx()),
        }
    }
    Ok(s)
}

/// Loads, overrides, and resolves a scenario file.
pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario file {}", path.display()))?;
    let fallback_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    resolve_scenario(&text, path.parent(), &fallback_name, overrides)
        .with_context(|| format!("in scenario file {}", path.display()))
}

pub fn resolve_scenario(
    text: &str,
    base_dir: Option<&Path>,
    fallback_name: &str,
    overrides: &[String],
) -> Result<Scenario> {
    let mut sections = parse_sections(text)?;
    apply_overrides(&mut sections, overrides)?;

    for sec in &sections {
        match sec.name.as_str() {
            "scenario" | "params" | "ground" | "mpc" | "pid" | "reference" | "scheduler" => {}
            other => bail!("unknown section [{other}]"),
        }
    }
    let find = |name: &str| sections.iter().find(|s| s.name == name);

    let header = match find("scenario") {
        Some(sec) => parse_scenario_section(sec, base_dir)?,
        None => bail!("missing [scenario] section"),
    };
    let t_end = header.t_end.ok_or_else(|| anyhow!("[scenario] t_end is required"))?;
    let control_dt = header
        .control_dt
        .ok_or_else(|| anyhow!("[scenario] control_dt is required"))?;
    if !(t_end > 0.0) || !(control_dt > 0.0) {
        bail!("t_end and control_dt must be positive");
    }
    let steps = (t_end / control_dt).round();
    if steps < 1.0 || (steps * control_dt - t_end).abs() > 1e-6 * t_end.max(1.0) {
        bail!("control_dt {control_dt} must divide t_end {t_end}");
    }

    // Robot parameters: file first, then inline [params] overrides.
    let mut params = match &header.params_path {
        Some(path) => paramfile::load_params(path)?,
        None => RobotParams::default(),
    };
    if let Some(sec) = find("params") {
        let mut saw = ParamTracking::default();
        for (key, value, lineno) in &sec.entries {
            paramfile::apply_param(&mut params, key, value, &mut saw)
                .with_context(|| format!("[params] line {lineno}"))?;
        }
        paramfile::finish_params(&mut params, &saw);
    }
    params.validate().map_err(|e| anyhow!(e))?;

    let ground = match find("ground") {
        Some(sec) => parse_ground_section(sec)?,
        None => GroundModel::default(),
    };
    ground.validate().map_err(|e| anyhow!(e))?;

    let mut mpc = match find("mpc") {
        Some(sec) => parse_mpc_section(sec, MpcConfig::for_robot(&params), control_dt)?,
        None => MpcConfig::for_robot(&params),
    };
    mpc.dt = control_dt;

    let pid = match find("pid") {
        Some(sec) => parse_pid_section(sec)?,
        None => PidGains::default(),
    };

    let raw_ref = match find("reference") {
        Some(sec) => parse_reference_section(sec)?,
        None => RawReference {
            kind: RefKind::Hold,
            v_cruise: 0.0,
            t_ramp: 0.0,
            t_start: 0.0,
            theta_ref: None,
            f_t_alloc: 0.0,
        },
    };
    let scheduler = match find("scheduler") {
        Some(sec) => parse_scheduler_section(sec)?,
        None => SchedulerConfig {
            t_mpc_enable: 0.0,
            thrust_enable: true,
        },
    };
    if scheduler.t_mpc_enable < 0.0 {
        bail!("t_mpc_enable must be non-negative");
    }
    if raw_ref.f_t_alloc < 0.0 {
        bail!("f_t_alloc must be non-negative");
    }
    if raw_ref.f_t_alloc > params.f_t_max {
        bail!(
            "f_t_alloc = {} exceeds the thruster's capability f_t_max = {}",
            raw_ref.f_t_alloc,
            params.f_t_max
        );
    }
    // The thrust channel is run as an allocation: pinned at the scheduled
    // magnitude (zero when no thrust is scheduled or the thruster is
    // disabled), leaving the solver the motor channel.
    if !scheduler.thrust_enable {
        mpc.u_min[1] = 0.0;
        mpc.u_max[1] = 0.0;
    } else {
        mpc.u_min[1] = raw_ref.f_t_alloc;
        mpc.u_max[1] = raw_ref.f_t_alloc;
    }
    mpc.validate().map_err(|e| anyhow!(e))?;

    let theta_ref_auto = raw_ref.theta_ref.is_none();
    let theta_ref = match raw_ref.theta_ref {
        Some(v) => v,
        None => equilibrium_pitch(raw_ref.f_t_alloc, &params).ok_or_else(|| {
            anyhow!(
                "no standstill equilibrium pitch exists for f_t_alloc = {} on this incline",
                raw_ref.f_t_alloc
            )
        })?,
    };
    let reference = ReferenceConfig {
        kind: raw_ref.kind,
        v_cruise: raw_ref.v_cruise,
        t_ramp: raw_ref.t_ramp,
        t_start: raw_ref.t_start,
        theta_ref,
        theta_ref_auto,
        f_t_alloc: raw_ref.f_t_alloc,
    };

    let theta0 = if header.theta0_auto {
        theta_ref
    } else {
        header.theta0.unwrap_or(0.0)
    };
    let x0 = State {
        phi: header.phi0,
        theta: theta0,
        phi_dot: header.phi_dot0,
        theta_dot: header.theta_dot0,
    };

    Ok(Scenario {
        name: header.name.unwrap_or_else(|| fallback_name.to_string()),
        plant: header.plant,
        t_end,
        control_dt,
        x0,
        theta0_auto: header.theta0_auto,
        seed: header.seed,
        out_dir: header.out_dir,
        params,
        ground,
        mpc,
        pid,
        reference,
        scheduler,
    })
}

impl Scenario {
    /// Reference trajectory implied by the `[reference]` section.
    /// Thrust carried by the PID path and assumed by the reference lean:
    /// the scheduled allocation, or zero with the thruster disabled.
    pub fn thrust_feedforward(&self) -> f64 {
        if self.scheduler.thrust_enable {
            self.reference.f_t_alloc
        } else {
            0.0
        }
    }

    pub fn reference_plan(&self) -> ClimbPlan {
        match self.reference.kind {
            RefKind::Hold => ClimbPlan::hold(self.reference.theta_ref),
            RefKind::Climb => ClimbPlan {
                t_start: self.reference.t_start,
                t_ramp: self.reference.t_ramp,
                v_cruise: self.reference.v_cruise,
                theta_ref: self.reference.theta_ref,
                phi0: self.x0.phi,
                lean: Some(LeanModel {
                    params: self.params,
                    f_t_ff: self.thrust_feedforward(),
                }),
            },
        }
    }

    /// Self-contained canonical snapshot: every value materialized, no
    /// external file references, reparseable by the same loader.
    pub fn resolved_ini(&self) -> String {
        let mut out = String::new();
        out.push_str("# resolved scenario snapshot\n[scenario]\n");
        out.push_str(&format!("name = {}\n", self.name));
        out.push_str(&format!("plant = {}\n", self.plant.label()));
        out.push_str(&format!("t_end = {}\n", self.t_end));
        out.push_str(&format!("control_dt = {}\n", self.control_dt));
        out.push_str(&format!("phi0 = {}\n", self.x0.phi));
        out.push_str(&format!("theta0 = {}\n", self.x0.theta));
        out.push_str(&format!("phi_dot0 = {}\n", self.x0.phi_dot));
        out.push_str(&format!("theta_dot0 = {}\n", self.x0.theta_dot));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str("\n[params]\n");
        out.push_str(&crate::paramfile::format_params(&self.params));
        let g = &self.ground;
        out.push_str(&format!(
            "\n[ground]\nk_ground = {}\nc_ground = {}\nmu_static = {}\nmu_coulomb = {}\nv_stribeck = {}\nv_reg = {}\ndt_physics = {}\nmax_penetration = {}\n",
            g.k_ground,
            g.c_ground,
            g.mu_static,
            g.mu_coulomb,
            g.v_stribeck,
            g.v_reg,
            g.dt_physics,
            g.max_penetration
        ));
        let m = &self.mpc;
        out.push_str(&format!(
            "\n[mpc]\nn_h = {}\nq = {} {} {} {}\nr = {} {}\nu_min = {} {}\nu_max = {} {}\ncone_margin = {}\nreg = {}\nslack_weight = {}\nmax_iters = {}\n",
            m.n_h,
            m.q[0],
            m.q[1],
            m.q[2],
            m.q[3],
            m.r[0],
            m.r[1],
            m.u_min[0],
            m.u_min[1],
            m.u_max[0],
            m.u_max[1],
            m.cone_margin,
            m.reg,
            m.slack_weight,
            m.max_iters
        ));
        let pg = &self.pid;
        out.push_str(&format!(
            "\n[pid]\nkp = {}\nki = {}\nkd = {}\nkv = {}\nkvi = {}\npitch_cmd_limit = {}\nintegral_clamp = {}\nvel_integral_clamp = {}\n",
            pg.kp,
            pg.ki,
            pg.kd,
            pg.kv,
            pg.kvi,
            pg.pitch_cmd_limit,
            pg.integral_clamp,
            pg.vel_integral_clamp
        ));
        let r = &self.reference;
        let kind = match r.kind {
            RefKind::Hold => "hold",
            RefKind::Climb => "climb",
        };
        out.push_str(&format!(
            "\n[reference]\ntype = {}\nv_cruise = {}\nt_ramp = {}\nt_start = {}\ntheta_ref = {}\nf_t_alloc = {}\n",
            kind, r.v_cruise, r.t_ramp, r.t_start, r.theta_ref, r.f_t_alloc
        ));
        out.push_str(&format!(
            "\n[scheduler]\nt_mpc_enable = {}\nthrust_enable = {}\n",
            self.scheduler.t_mpc_enable, self.scheduler.thrust_enable
        ));
        out
    }
}
