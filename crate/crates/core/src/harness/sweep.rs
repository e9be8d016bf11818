//! Parameter sweeps over `delta` (and `p`) with a fit of the blow-up exponent.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use super::config::RunConfig;
use super::run::{run_single, BlowupReport};
use super::svg::{LineChart, Series};
use super::{create_dir, fmt_f, fmt_opt, write_file};
use crate::asymptotics::critical_data;
use crate::error::{Error, Result};
use crate::fit::fit_log_log;

/// Rows needed per `(p, eps0)` group for an exponent fit.
pub const MIN_FIT_ROWS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum RowStatus {
    /// Blow-up measured.
    Ok,
    /// Reached `t_max` without a blow-up event.
    NoEvent,
    Failed(String),
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::NoEvent => "no_event",
            RowStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub p: u32,
    pub eps0: f64,
    pub amplitude: Option<f64>,
    pub q_max: Option<f64>,
    pub t_blow_measured: Option<f64>,
    pub t_blow_predicted: Option<f64>,
    pub t_star: f64,
    pub status: RowStatus,
    /// Run subdirectory, relative to the sweep directory.
    pub dir: PathBuf,
    pub report: Option<BlowupReport>,
}

/// Slope of `log(t_blow - 1)` against `log delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub p: u32,
    pub eps0: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    /// `kappa = 1 - (1 - eps0) p`
    pub expected: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Sorted by `(p, delta)`.
    pub rows: Vec<SweepRow>,
    pub fits: Vec<ExponentFit>,
    pub manifest: Vec<PathBuf>,
}

impl SweepResult {
    pub fn fit_for(&self, p: u32) -> Option<&ExponentFit> {
        self.fits.iter().find(|f| f.p == p)
    }
}

fn run_row(config: &RunConfig, dir: PathBuf, delta: f64, p: u32) -> SweepRow {
    let mut c = config.clone();
    c.params.delta = delta;
    c.params.p = p;
    c.sweep_delta.clear();
    c.sweep_p.clear();
    c.output_dir = config.output_dir.join(&dir);
    let t_star = critical_data(&c.params).t_star;
    let mut row = SweepRow {
        delta,
        p,
        eps0: c.params.eps0,
        amplitude: None,
        q_max: None,
        t_blow_measured: None,
        t_blow_predicted: None,
        t_star,
        status: RowStatus::NoEvent,
        dir,
        report: None,
    };
    match run_single(&c) {
        Ok(report) => {
            row.amplitude = Some(report.params.amplitude);
            row.q_max = Some(report.q_max);
            row.t_blow_measured = report.t_blow_measured;
            row.t_blow_predicted = report.t_blow_predicted;
            row.status = if let Some(f) = report.failure() {
                RowStatus::Failed(format!("{f:?}"))
            } else if report.t_blow_measured.is_some() {
                RowStatus::Ok
            } else {
                RowStatus::NoEvent
            };
            row.report = Some(report);
        }
        Err(e) => row.status = RowStatus::Failed(e.to_string()),
    }
    row
}

/// Fit each `(p, eps0)` group with enough measured rows.
pub fn fit_exponents(rows: &[SweepRow]) -> Vec<ExponentFit> {
    let mut ps: Vec<u32> = rows.iter().map(|r| r.p).collect();
    ps.dedup();
    ps.into_iter()
        .filter_map(|p| {
            let used: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.p == p && r.status == RowStatus::Ok)
                .filter(|r| r.t_blow_measured.is_some_and(|t| t > 1.0))
                .collect();
            if used.len() < MIN_FIT_ROWS {
                return None;
            }
            let xs: Vec<f64> = used.iter().map(|r| r.delta).collect();
            let ys: Vec<f64> = used.iter().map(|r| r.t_blow_measured.unwrap() - 1.0).collect();
            let fit = fit_log_log(&xs, &ys).ok()?;
            let eps0 = used[0].eps0;
            Some(ExponentFit {
                p,
                eps0,
                slope: fit.slope,
                slope_stderr: fit.slope_stderr,
                intercept: fit.intercept,
                expected: 1.0 - (1.0 - eps0) * p as f64,
                rows: used.len(),
            })
        })
        .collect()
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("delta,p,eps0,amplitude,q_max,t_blow_measured,t_blow_predicted,t_star,status\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f(r.delta),
            r.p,
            fmt_f(r.eps0),
            fmt_opt(r.amplitude),
            fmt_opt(r.q_max),
            fmt_opt(r.t_blow_measured),
            fmt_opt(r.t_blow_predicted),
            fmt_f(r.t_star),
            r.status.as_str()
        );
    }
    out
}

fn sweep_plot(rows: &[SweepRow], fits: &[ExponentFit]) -> String {
    let mut series = Vec::new();
    let mut ps: Vec<u32> = rows.iter().map(|r| r.p).collect();
    ps.dedup();
    for p in ps {
        let group: Vec<&SweepRow> = rows.iter().filter(|r| r.p == p).collect();
        let pick = |f: fn(&SweepRow) -> Option<f64>| -> Vec<(f64, f64)> {
            group.iter().filter_map(|r| f(r).map(|t| (r.delta, t - 1.0))).collect()
        };
        series.push(Series::new(format!("measured p={p}"), pick(|r| r.t_blow_measured)));
        series.push(Series::new(format!("predicted p={p}"), pick(|r| r.t_blow_predicted)));
        if let Some(f) = fits.iter().find(|f| f.p == p) {
            let line = group
                .iter()
                .map(|r| (r.delta, (f.intercept + f.slope * r.delta.ln()).exp()))
                .collect();
            series.push(Series::new(format!("fit p={p}: {:.3}", f.slope), line));
        }
    }
    LineChart {
        title: "blow-up time against pulse width".into(),
        x_label: "delta".into(),
        y_label: "t_blow - 1".into(),
        log_x: true,
        log_y: true,
        series,
    }
    .render()
}

/// Run every `(delta, p)` of the sweep axes in parallel and fit the exponent.
pub fn run_sweep(config: &RunConfig) -> Result<SweepResult> {
    let mut deltas = config.sweep_delta.clone();
    if deltas.len() < MIN_FIT_ROWS {
        return Err(Error::InvalidParameter(format!(
            "sweep needs at least {MIN_FIT_ROWS} values in sweep.delta, got {}",
            deltas.len()
        )));
    }
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let mut ps = if config.sweep_p.is_empty() {
        vec![config.params.p]
    } else {
        config.sweep_p.clone()
    };
    ps.sort_unstable();
    ps.dedup();
    let jobs: Vec<(f64, u32)> = ps
        .iter()
        .flat_map(|&p| deltas.iter().map(move |&d| (d, p)))
        .collect();
    create_dir(&config.output_dir)?;
    let mut manifest = Vec::new();
    config.echo_into(&config.output_dir)?;
    manifest.push(PathBuf::from("config.txt"));
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(d, p)| run_row(config, PathBuf::from(format!("delta_{d}_p_{p}")), d, p))
        .collect();
    for r in &rows {
        if let Some(rep) = &r.report {
            manifest.extend(rep.manifest.iter().map(|f| r.dir.join(f)));
        } else if config.output_dir.join(&r.dir).join("config.txt").exists() {
            manifest.push(r.dir.join("config.txt"));
        }
    }
    let fits = fit_exponents(&rows);
    let dir = &config.output_dir;
    write_file(dir, "sweep.csv", &sweep_csv(&rows), &mut manifest)?;
    write_file(dir, "sweep.svg", &sweep_plot(&rows, &fits), &mut manifest)?;
    let mut summary = String::new();
    for f in &fits {
        let _ = writeln!(
            summary,
            "p = {}, eps0 = {}: slope = {} +- {} (expected {}), rows = {}",
            f.p,
            f.eps0,
            fmt_f(f.slope),
            fmt_f(f.slope_stderr),
            fmt_f(f.expected),
            f.rows
        );
    }
    for r in rows.iter().filter(|r| matches!(r.status, RowStatus::Failed(_))) {
        if let RowStatus::Failed(msg) = &r.status {
            let _ = writeln!(summary, "failed delta = {}, p = {}: {msg}", r.delta, r.p);
        }
    }
    manifest.push(PathBuf::from("sweep.txt"));
    for f in &manifest {
        let _ = writeln!(summary, "file = {}", f.display());
    }
    let path = dir.join("sweep.txt");
    std::fs::write(&path, summary).map_err(|e| Error::io(&path, e))?;
    Ok(SweepResult { rows, fits, manifest })
}
