//! Model-versus-simulator contact agreement check over a finished run.
//!
//! The model columns come from the analytic rolling-contact solve, the
//! sim columns from the compliant ground truth. Agreement is scored as a
//! relative RMS over the stabilized part of the run.

use crate::csvlog::{self, Row};
use crate::scenario::{load_scenario, Plant, Scenario};

use anyhow::{bail, Context, Result};
use std::path::Path;

pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Settling margin after the predictive handover before scoring starts (s).
pub const SETTLE_MARGIN: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct CompareReport {
    pub window_start: f64,
    pub samples: usize,
    /// Window rows without a model-side solution, left out of the score.
    pub skipped: usize,
    pub rms_rel_h1: f64,
    pub rms_rel_h2: f64,
    pub rms_rel_fgx: f64,
    pub rms_rel_fgn: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn rms_rel(pairs: &[(f64, f64)]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (model, sim) in pairs {
        let d = model - sim;
        num += d * d;
        den += sim * sim;
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

fn collect(
    rows: &[Row],
    window_start: f64,
    model: impl Fn(&Row) -> Option<f64>,
    sim: impl Fn(&Row) -> Option<f64>,
) -> (Vec<(f64, f64)>, usize) {
    let mut pairs = Vec::new();
    let mut skipped = 0;
    for r in rows.iter().filter(|r| r.t >= window_start) {
        match (model(r), sim(r)) {
            (Some(m), Some(s)) => pairs.push((m, s)),
            _ => skipped += 1,
        }
    }
    (pairs, skipped)
}

/// Scores the agreement for an already-loaded scenario and row set.
pub fn compare_rows(sc: &Scenario, rows: &[Row], threshold: f64) -> Result<CompareReport> {
    if sc.plant != Plant::Compliant {
        bail!("run used the reduced plant; there is no simulator channel to compare against");
    }
    if rows.iter().all(|r| r.h1_sim.is_none()) {
        bail!("trajectory has no simulator contact columns");
    }
    let window_start = sc.scheduler.t_mpc_enable + SETTLE_MARGIN;
    let (h1, skipped) = collect(rows, window_start, |r| r.h1_model, |r| r.h1_sim);
    if h1.is_empty() {
        bail!(
            "no scored samples at t >= {window_start}; the run is too short or ended early"
        );
    }
    let (h2, _) = collect(rows, window_start, |r| r.h2_model, |r| r.h2_sim);
    let (fgx, _) = collect(rows, window_start, |r| r.fgx_model, |r| r.fgx_sim);
    let (fgn, _) = collect(rows, window_start, |r| r.fgn_model, |r| r.fgn_sim);

    let rms_rel_h1 = rms_rel(&h1);
    let rms_rel_h2 = rms_rel(&h2);
    Ok(CompareReport {
        window_start,
        samples: h1.len(),
        skipped,
        rms_rel_h1,
        rms_rel_h2,
        rms_rel_fgx: rms_rel(&fgx),
        rms_rel_fgn: rms_rel(&fgn),
        threshold,
        pass: rms_rel_h1 < threshold && rms_rel_h2 < threshold,
    })
}

/// Loads a run directory and scores it.
pub fn compare_contact(run_dir: &Path, threshold: f64) -> Result<CompareReport> {
    let sc = load_scenario(&run_dir.join("scenario.resolved.ini"), &[])
        .context("reading resolved scenario from run directory")?;
    let rows = csvlog::read_rows(&run_dir.join("trajectory.csv"))
        .context("reading trajectory from run directory")?;
    compare_rows(&sc, &rows, threshold)
}

pub fn format_report(r: &CompareReport) -> String {
    format!(
        "window_start = {}\n\
         samples = {}\n\
         skipped = {}\n\
         rms_rel_h1 = {}\n\
         rms_rel_h2 = {}\n\
         rms_rel_fgx = {}\n\
         rms_rel_fgn = {}\n\
         threshold = {}\n\
         result = {}\n",
        r.window_start,
        r.samples,
        r.skipped,
        r.rms_rel_h1,
        r.rms_rel_h2,
        r.rms_rel_fgx,
        r.rms_rel_fgn,
        r.threshold,
        if r.pass { "pass" } else { "fail" },
    )
}
