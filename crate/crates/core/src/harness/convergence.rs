//! Self-convergence under joint refinement of `dr`, `dt` and the fan.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use super::config::RunConfig;
use super::run::{base_grid, jacobian_gap, prepare, simulate, step_rule};
use super::{create_dir, fmt_f, write_file};
use crate::diagnostics::{energy_identity_residual, refinement_orders, transport_residual_until, Psi};
use crate::error::{Error, Result};
use crate::radial_solver::evolve;

/// Fields and `mu` are compared at the first time the coarsest run's
/// `min mu` drops to this value (or at its final time).
pub const PRE_SHOCK_MU: f64 = 0.5;

/// What one refinement level measured.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub points_per_pulse: usize,
    pub fan_count: usize,
    pub dr: f64,
    pub steps: usize,
    pub t_blow_measured: Option<f64>,
    /// Over the whole run, see [`super::run::jacobian_gap`].
    pub jac_gap: f64,
    /// `[v, w]`, max norm, up to the comparison time.
    pub transport: [f64; 2],
    /// `[v, w]`, max norm, at the comparison time.
    pub energy: [f64; 2],
}

/// `values` are per level for residuals and per level pair for
/// self-convergence differences; `orders` are between successive values.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub quantity: String,
    pub values: Vec<f64>,
    pub orders: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub t_compare: f64,
    pub levels: Vec<LevelSummary>,
    pub rows: Vec<OrderRow>,
    pub manifest: Vec<PathBuf>,
}

impl ConvergenceTable {
    pub fn row(&self, quantity: &str) -> Option<&OrderRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }
}

struct LevelData {
    summary: LevelSummary,
    v: Vec<f64>,
    w: Vec<f64>,
    mu_ode: Vec<f64>,
    mu_jac: Vec<f64>,
}

fn run_level(config: &RunConfig, level: usize, t_compare: f64) -> Result<LevelData> {
    let params = config.resolve_params()?;
    let factor = 1usize << level;
    let grid = base_grid(config, params.delta)?.refined(factor);
    let fan_count = config.fan_count * factor;
    let prep = prepare(config, &params, grid, fan_count)?;
    let mut tracker = prep.tracker;
    let rule = step_rule(config);
    let first = evolve(prep.state, params.p, t_compare, &rule, &mut [&mut tracker])?;
    if let Some(e) = first.events.first() {
        return Err(Error::Domain(format!(
            "level {level} stopped before the comparison time {t_compare}: {e:?}"
        )));
    }
    let fan = &tracker.fan;
    let last = fan.latest().expect("fan has samples");
    let mu_ode = last.points.iter().map(|p| p.mu_ode).collect();
    let mu_jac = last.points.iter().map(|p| p.mu_jac).collect();
    let mut transport = [0.0; 2];
    let mut energy = [0.0; 2];
    for (k, psi) in [Psi::V, Psi::W].into_iter().enumerate() {
        transport[k] = transport_residual_until(fan, psi, t_compare)?.max_abs;
        energy[k] = energy_identity_residual(fan, last.t, params.delta, psi)?.max_abs;
    }
    let v = first.state.v.clone();
    let w = first.state.w.clone();
    let steps_first = first.steps;
    let rest = evolve(first.state, params.p, config.time.t_max, &rule, &mut [&mut tracker])?;
    Ok(LevelData {
        summary: LevelSummary {
            points_per_pulse: config.grid.points_per_pulse * factor,
            fan_count,
            dr: grid.dr(),
            steps: steps_first + rest.steps,
            t_blow_measured: tracker.event.and_then(|e| e.t_blow_extrapolated),
            jac_gap: jacobian_gap(&tracker.fan),
            transport,
            energy,
        },
        v,
        w,
        mu_ode,
        mu_jac,
    })
}

/// Max difference between successive levels on the coarser level's nodes.
fn nested_differences(levels: &[LevelData], pick: impl Fn(&LevelData) -> Vec<&[f64]>) -> Vec<f64> {
    levels
        .windows(2)
        .map(|pair| {
            pick(&pair[0])
                .into_iter()
                .zip(pick(&pair[1]))
                .map(|(coarse, fine)| {
                    let ratio = (fine.len() - 1) / (coarse.len() - 1);
                    coarse
                        .iter()
                        .enumerate()
                        .map(|(i, x)| (x - fine[i * ratio]).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

fn order_row(quantity: &str, values: Vec<f64>) -> OrderRow {
    OrderRow {
        quantity: quantity.to_string(),
        orders: refinement_orders(&values),
        values,
    }
}

/// Run `levels` resolutions, each halving `dr`, `dt` and `du`, and report
/// observed orders.
pub fn convergence_study(config: &RunConfig, levels: usize) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(Error::InvalidParameter(format!(
            "convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let params = config.resolve_params()?;
    let coarse = simulate(config, &params, base_grid(config, params.delta)?, config.fan_count, config.time.t_max)?;
    let t_compare = coarse
        .fan()
        .samples
        .iter()
        .find(|s| s.mu_min().0 <= PRE_SHOCK_MU)
        .map_or(coarse.outcome.state.t, |s| s.t);
    let data: Vec<LevelData> = (0..levels)
        .into_par_iter()
        .map(|k| run_level(config, k, t_compare))
        .collect::<Result<_>>()?;

    let mut rows = vec![
        order_row("field", nested_differences(&data, |d| vec![&d.v, &d.w])),
        order_row("mu_ode", nested_differences(&data, |d| vec![&d.mu_ode])),
        order_row("mu_jac", nested_differences(&data, |d| vec![&d.mu_jac])),
        order_row("jac_gap", data.iter().map(|d| d.summary.jac_gap).collect()),
        order_row("transport[v]", data.iter().map(|d| d.summary.transport[0]).collect()),
        order_row("transport[w]", data.iter().map(|d| d.summary.transport[1]).collect()),
        order_row("energy[v]", data.iter().map(|d| d.summary.energy[0]).collect()),
        order_row("energy[w]", data.iter().map(|d| d.summary.energy[1]).collect()),
    ];
    let t_blow: Option<Vec<f64>> = data.iter().map(|d| d.summary.t_blow_measured).collect();
    if let Some(t) = t_blow {
        rows.push(order_row("t_blow", t.windows(2).map(|w| (w[0] - w[1]).abs()).collect()));
    }

    let dir = &config.output_dir;
    create_dir(dir)?;
    config.echo_into(dir)?;
    let mut manifest = vec![PathBuf::from("config.txt")];
    let mut csv = String::from("quantity,index,value,order\n");
    for r in &rows {
        for (i, v) in r.values.iter().enumerate() {
            let order = i.checked_sub(1).map(|j| fmt_f(r.orders[j])).unwrap_or_default();
            let _ = writeln!(csv, "{},{i},{},{order}", r.quantity, fmt_f(*v));
        }
    }
    write_file(dir, "convergence.csv", &csv, &mut manifest)?;
    let mut lv = String::from("level,points_per_pulse,fan_count,dr,steps,t_blow_measured,jac_gap\n");
    for (k, d) in data.iter().enumerate() {
        let s = &d.summary;
        let _ = writeln!(
            lv,
            "{k},{},{},{},{},{},{}",
            s.points_per_pulse,
            s.fan_count,
            fmt_f(s.dr),
            s.steps,
            super::fmt_opt(s.t_blow_measured),
            fmt_f(s.jac_gap)
        );
    }
    write_file(dir, "levels.csv", &lv, &mut manifest)?;
    Ok(ConvergenceTable {
        t_compare,
        levels: data.into_iter().map(|d| d.summary).collect(),
        rows,
        manifest,
    })
}
