//! Flat `key = value` robot parameter files.
//!
//! Every key is optional; unset keys keep the library defaults. Vector
//! values are two whitespace-separated numbers. `#` and `;` start
//! comments. `beta_deg` is accepted as a convenience alongside `beta`
//! (radians); passing both is an error.

use mip_core::dynamics::{thrust_input_map, RobotParams};
use mip_core::math::Vec2;

use anyhow::{anyhow, bail, Context, Result};
use std::path::Path;

/// Strips comments and surrounding whitespace; returns `None` for lines
/// with no content.
fn payload(line: &str) -> Option<&str> {
    let cut = line.split(['#', ';']).next().unwrap_or("").trim();
    if cut.is_empty() {
        None
    } else {
        Some(cut)
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .with_context(|| format!("key '{key}': expected a number, got '{value}'"))
}

fn parse_vec2(key: &str, value: &str) -> Result<Vec2> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 2 {
        bail!("key '{key}': expected two numbers, got '{value}'");
    }
    Ok(Vec2::new(parse_f64(key, parts[0])?, parse_f64(key, parts[1])?))
}

/// Applies one `key = value` pair onto a parameter set. Returns an error
/// on unknown keys so typos fail loudly instead of silently keeping a
/// default.
pub fn apply_param(p: &mut RobotParams, key: &str, value: &str, saw: &mut ParamTracking) -> Result<()> {
    match key {
        "m_b" => p.m_b = parse_f64(key, value)?,
        "m_w" => p.m_w = parse_f64(key, value)?,
        "i_b" => p.i_b = parse_f64(key, value)?,
        "i_w" => p.i_w = parse_f64(key, value)?,
        "r" => p.r = parse_f64(key, value)?,
        "beta" => {
            if saw.beta_deg {
                bail!("give either 'beta' or 'beta_deg', not both");
            }
            saw.beta = true;
            p.beta = parse_f64(key, value)?;
        }
        "beta_deg" => {
            if saw.beta {
                bail!("give either 'beta' or 'beta_deg', not both");
            }
            saw.beta_deg = true;
            p.beta = parse_f64(key, value)?.to_radians();
        }
        "l_b" => p.l_b = parse_vec2(key, value)?,
        "l_t" => {
            p.l_t = parse_vec2(key, value)?;
            saw.l_t = true;
        }
        "l_tz" => {
            p.l_tz = parse_f64(key, value)?;
            saw.l_tz = true;
        }
        "g" => p.g = parse_f64(key, value)?,
        "k1" => p.k1 = parse_f64(key, value)?,
        "k2" => p.k2 = parse_f64(key, value)?,
        "mu_s" => p.mu_s = parse_f64(key, value)?,
        "f_t_max" => p.f_t_max = parse_f64(key, value)?,
        other => bail!("unknown robot parameter '{other}'"),
    }
    Ok(())
}

/// Which interacting keys appeared, so derived values and conflicts can be
/// resolved after parsing.
#[derive(Default)]
pub struct ParamTracking {
    pub beta: bool,
    pub beta_deg: bool,
    pub l_t: bool,
    pub l_tz: bool,
}

/// Recomputes the zero-pitch thrust moment arm when `l_t` changed without
/// an explicit `l_tz`, keeping the pair consistent by construction.
pub fn finish_params(p: &mut RobotParams, saw: &ParamTracking) {
    if saw.l_t && !saw.l_tz {
        p.l_tz = thrust_input_map(0.0, p)[1];
    }
}

/// Parses a parameter file on top of the library defaults.
pub fn load_params(path: &Path) -> Result<RobotParams> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading parameter file {}", path.display()))?;
    parse_params(&text).with_context(|| format!("in parameter file {}", path.display()))
}

pub fn parse_params(text: &str) -> Result<RobotParams> {
    let mut p = RobotParams::default();
    let mut saw = ParamTracking::default();
    for (lineno, raw) in text.lines().enumerate() {
        let Some(line) = payload(raw) else { continue };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value', got '{line}'", lineno + 1))?;
        apply_param(&mut p, key.trim(), value.trim(), &mut saw)
            .with_context(|| format!("line {}", lineno + 1))?;
    }
    finish_params(&mut p, &saw);
    p.validate().map_err(|e| anyhow!(e))?;
    Ok(p)
}

/// Canonical serialization used for the resolved-scenario snapshot.
pub fn format_params(p: &RobotParams) -> String {
    format!(
        "m_b = {}\nm_w = {}\ni_b = {}\ni_w = {}\nr = {}\nbeta = {}\nl_b = {} {}\nl_t = {} {}\nl_tz = {}\ng = {}\nk1 = {}\nk2 = {}\nmu_s = {}\nf_t_max = {}\n",
        p.m_b,
        p.m_w,
        p.i_b,
        p.i_w,
        p.r,
        p.beta,
        p.l_b.x,
        p.l_b.y,
        p.l_t.x,
        p.l_t.y,
        p.l_tz,
        p.g,
        p.k1,
        p.k2,
        p.mu_s,
        p.f_t_max
    )
}
