//! `mu` from the characteristic ODE, from the Jacobian and from the
//! leading-order formula, side by side.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use super::config::RunConfig;
use super::run::{base_grid, jacobian_gap, simulate, Simulation};
use super::{create_dir, fmt_f, write_file};
use crate::asymptotics::mu_asymptotic;
use crate::error::{Error, Result};
use crate::fit::{fit_log_log, LineFit};

/// Time samples per pulse width in `compare.csv`.
pub const COMPARE_TIME_SAMPLES: usize = 64;
/// Characteristics per pulse width in `compare.csv`.
pub const COMPARE_LABELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub delta: f64,
    pub t: f64,
    pub u: f64,
    pub mu_ode: f64,
    pub mu_jac: f64,
    pub mu_asymptotic: f64,
}

/// Sup errors of one pulse width, over every recorded `(t, u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareSummary {
    pub delta: f64,
    pub sup_asymptotic: f64,
    /// Relative, while `min mu > JAC_MU_FLOOR`.
    pub sup_jac: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
    /// Sorted by decreasing `delta`.
    pub summaries: Vec<CompareSummary>,
    /// Fit of `log sup |mu_ode - mu_asymptotic|` against `log delta`; needs
    /// three or more pulse widths.
    pub fit: Option<LineFit>,
    /// `(1 - eps0) p`
    pub expected_order: f64,
    pub manifest: Vec<PathBuf>,
}

fn table_rows(sim: &Simulation) -> Vec<CompareRow> {
    let fan = sim.fan();
    let n = fan.samples.len();
    let t_stride = (n / COMPARE_TIME_SAMPLES).max(1);
    let u_stride = ((fan.len() - 1) / COMPARE_LABELS).max(1);
    let mut rows = Vec::new();
    for s in fan.samples.iter().step_by(t_stride) {
        for j in (0..fan.len()).step_by(u_stride) {
            let u = fan.labels[j];
            let pt = &s.points[j];
            rows.push(CompareRow {
                delta: sim.params.delta,
                t: s.t,
                u,
                mu_ode: pt.mu_ode,
                mu_jac: pt.mu_jac,
                mu_asymptotic: mu_asymptotic(s.t, -u / sim.params.delta, &sim.params, &sim.phi1),
            });
        }
    }
    rows
}

/// Run each pulse width of `sweep.delta` (or just `params.delta`) and compare
/// the three forms of `mu`.
pub fn compare_mu(config: &RunConfig) -> Result<CompareTable> {
    let mut deltas = if config.sweep_delta.is_empty() {
        vec![config.params.delta]
    } else {
        config.sweep_delta.clone()
    };
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let results: Vec<Result<(Vec<CompareRow>, CompareSummary)>> = deltas
        .par_iter()
        .map(|&delta| {
            let mut c = config.clone();
            c.params.delta = delta;
            let params = c.resolve_params()?;
            let sim = simulate(&c, &params, base_grid(&c, delta)?, c.fan_count, c.time.t_max)?;
            if let Some(f) = sim.outcome.events.iter().find(|e| {
                !matches!(e, crate::radial_solver::SolverEvent::ObserverStop { .. })
            }) {
                return Err(Error::Domain(format!("run at delta = {delta} failed: {f:?}")));
            }
            let summary = CompareSummary {
                delta,
                sup_asymptotic: super::run::asymptotic_gap(sim.fan(), &params, &sim.phi1),
                sup_jac: jacobian_gap(sim.fan()),
                t_end: sim.outcome.state.t,
            };
            Ok((table_rows(&sim), summary))
        })
        .collect();
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for r in results {
        let (rs, s) = r?;
        rows.extend(rs);
        summaries.push(s);
    }
    let fit = if summaries.len() >= 3 && summaries.iter().all(|s| s.sup_asymptotic > 0.0) {
        let xs: Vec<f64> = summaries.iter().map(|s| s.delta).collect();
        let ys: Vec<f64> = summaries.iter().map(|s| s.sup_asymptotic).collect();
        Some(fit_log_log(&xs, &ys)?)
    } else {
        None
    };

    let dir = &config.output_dir;
    create_dir(dir)?;
    config.echo_into(dir)?;
    let mut manifest = vec![PathBuf::from("config.txt")];
    let mut csv = String::from("delta,t,u,mu_ode,mu_jac,mu_asymptotic,abs_jac,abs_asymptotic\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            fmt_f(r.delta),
            fmt_f(r.t),
            fmt_f(r.u),
            fmt_f(r.mu_ode),
            fmt_f(r.mu_jac),
            fmt_f(r.mu_asymptotic),
            fmt_f((r.mu_ode - r.mu_jac).abs()),
            fmt_f((r.mu_ode - r.mu_asymptotic).abs())
        );
    }
    write_file(dir, "compare.csv", &csv, &mut manifest)?;
    let mut summary = String::from("delta,sup_asymptotic,sup_jac,t_end\n");
    for s in &summaries {
        let _ = writeln!(
            summary,
            "{},{},{},{}",
            fmt_f(s.delta),
            fmt_f(s.sup_asymptotic),
            fmt_f(s.sup_jac),
            fmt_f(s.t_end)
        );
    }
    write_file(dir, "compare_summary.csv", &summary, &mut manifest)?;
    Ok(CompareTable {
        rows,
        summaries,
        fit,
        expected_order: config.params.smallness_order(),
        manifest,
    })
}
