//! Single runs: data, evolution with fan tracking, diagnostics and output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::svg::{LineChart, Series};
use super::{fmt_f, fmt_opt, write_file};
use crate::acoustic_geometry::{seed_fan, trchi_pair, CharacteristicFan, FanTracker, MuSample};
use crate::asymptotics::{critical_data, mu_asymptotic, predict_blowup, Prediction};
use crate::diagnostics::{
    d2_growth, energy_identity_residual, transport_residual, GrowthReport, Psi, ResidualReport,
    RESIDUAL_MU_FLOOR,
};
use crate::error::Result;
use crate::grid::RadialGrid;
use crate::profile::{make_profile, Profile, ProfileKind};
use crate::pulse_data::{build_phi1, initial_fields, max_shock_quantity, PulseParams, S_GRID_SAMPLES};
use crate::radial_solver::{
    evolve, BlowupThresholds, BlowupTrigger, EvolveOutcome, FieldState, SolverEvent, StepRule,
};

/// `mu_ode` and `mu_jac` are compared while `min mu` stays above this.
pub const JAC_MU_FLOOR: f64 = 0.2;

/// At most this many time samples go into `fan.csv`.
pub const FAN_CSV_MAX_SAMPLES: usize = 256;

/// Characteristics drawn in `fan.svg`.
const FAN_PLOT_LINES: usize = 17;

/// `phi_0` and `phi_1` for `params`; a zero amplitude gives the zero profile.
pub fn profiles(kind: ProfileKind, params: &PulseParams) -> Result<(Profile, Profile)> {
    let phi0 = if params.amplitude == 0.0 {
        Profile::zero()
    } else {
        make_profile(kind, params.amplitude)?
    };
    let phi1 = build_phi1(&phi0, params);
    Ok((phi0, phi1))
}

/// Grid with `points_per_pulse` cells across a pulse of width `delta`.
pub fn base_grid(config: &RunConfig, delta: f64) -> Result<RadialGrid> {
    RadialGrid::with_spacing(
        config.grid.r_min,
        config.grid.r_max,
        delta / config.grid.points_per_pulse as f64,
    )
}

pub fn step_rule(config: &RunConfig) -> StepRule {
    StepRule {
        cfl: config.time.cfl,
        ..StepRule::default()
    }
}

/// Initial state with a fan tracker attached, ready to evolve.
pub struct Prepared {
    pub params: PulseParams,
    pub phi0: Profile,
    pub phi1: Profile,
    pub state: FieldState,
    pub tracker: FanTracker,
}

pub fn prepare(config: &RunConfig, params: &PulseParams, grid: RadialGrid, fan_count: usize) -> Result<Prepared> {
    let (phi0, phi1) = profiles(config.profile.kind, params)?;
    let state = initial_fields(params, &phi0, &phi1, &grid)?;
    let fan = seed_fan(params, &state, fan_count)?;
    let thresholds = BlowupThresholds {
        mu_stop: config.detect.mu_stop,
        d2_cap: config.detect.d2_cap / params.delta * state.max_dr_v(),
    };
    let tracker = FanTracker::new(fan, &state, thresholds)?;
    Ok(Prepared {
        params: *params,
        phi0,
        phi1,
        state,
        tracker,
    })
}

/// A finished evolution with everything needed for diagnostics.
pub struct Simulation {
    pub params: PulseParams,
    pub phi0: Profile,
    pub phi1: Profile,
    /// `None` above the critical exponent, where the shock threshold is undefined.
    pub prediction: Option<Prediction>,
    pub tracker: FanTracker,
    pub outcome: EvolveOutcome,
    pub initial_energy: f64,
}

impl Simulation {
    pub fn fan(&self) -> &CharacteristicFan {
        &self.tracker.fan
    }
}

/// Evolve from `t = 1` to `t_end` (or until blow-up / failure).
pub fn simulate(
    config: &RunConfig,
    params: &PulseParams,
    grid: RadialGrid,
    fan_count: usize,
    t_end: f64,
) -> Result<Simulation> {
    let Prepared {
        params,
        phi0,
        phi1,
        state,
        mut tracker,
    } = prepare(config, params, grid, fan_count)?;
    let prediction = predict_blowup(&params, &phi0, &phi1).ok();
    let initial_energy = state.energy(params.p);
    let outcome = evolve(state, params.p, t_end, &step_rule(config), &mut [&mut tracker])?;
    Ok(Simulation {
        params,
        phi0,
        phi1,
        prediction,
        tracker,
        outcome,
        initial_energy,
    })
}

/// Worst `|mu_ode - mu_jac| / mu_ode` over samples with `min mu > JAC_MU_FLOOR`.
pub fn jacobian_gap(fan: &CharacteristicFan) -> f64 {
    fan.samples
        .iter()
        .take_while(|s| s.mu_min().0 > JAC_MU_FLOOR)
        .flat_map(|s| s.points.iter())
        .map(|pt| (pt.mu_ode - pt.mu_jac).abs() / pt.mu_ode)
        .fold(0.0, f64::max)
}

/// `sup |mu_ode - mu_asymptotic|` over every recorded `(t, u)`.
pub fn asymptotic_gap(fan: &CharacteristicFan, params: &PulseParams, phi1: &Profile) -> f64 {
    let mut sup = 0.0f64;
    for s in &fan.samples {
        for (pt, &u) in s.points.iter().zip(&fan.labels) {
            let asym = mu_asymptotic(s.t, -u / params.delta, params, phi1);
            sup = sup.max((pt.mu_ode - asym).abs());
        }
    }
    sup
}

/// `sup |trchi - 2/(t - u)|` over every recorded `(t, u)`.
pub fn trchi_check_sup(fan: &CharacteristicFan) -> Result<f64> {
    let mut sup = 0.0f64;
    for s in &fan.samples {
        for (pt, &u) in s.points.iter().zip(&fan.labels) {
            sup = sup.max(trchi_pair(s.t, u, pt.r, pt.c)?.1.abs());
        }
    }
    Ok(sup)
}

/// Diagnostics evaluated on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDiagnostics {
    pub mu_min: f64,
    pub jac_gap: f64,
    pub asymptotic_gap: f64,
    pub trchi_check_sup: f64,
    pub transport: Vec<ResidualReport>,
    /// Energy identity on the outermost characteristic, up to the last sample
    /// with `min mu > RESIDUAL_MU_FLOOR`.
    pub energy: Vec<ResidualReport>,
    /// `|E(t_end) - E(1)| / E(1)` of the grid energy.
    pub energy_drift: f64,
    pub d2_growth: Option<GrowthReport>,
    /// Diagnostics that could not be evaluated, with the reason.
    pub skipped: Vec<String>,
}

impl RunDiagnostics {
    pub fn compute(sim: &Simulation) -> Self {
        let fan = sim.fan();
        let mut skipped = Vec::new();
        let mut transport = Vec::new();
        let mut energy = Vec::new();
        let t_energy = fan
            .samples
            .iter()
            .take_while(|s| s.mu_min().0 > RESIDUAL_MU_FLOOR)
            .last()
            .map(|s| s.t);
        for psi in [Psi::V, Psi::W] {
            match transport_residual(fan, psi) {
                Ok(r) => transport.push(r),
                Err(e) => skipped.push(format!("transport[{psi}]: {e}")),
            }
            match t_energy.map(|t| energy_identity_residual(fan, t, sim.params.delta, psi)) {
                Some(Ok(r)) => energy.push(r),
                Some(Err(e)) => skipped.push(format!("energy[{psi}]: {e}")),
                None => skipped.push(format!("energy[{psi}]: no usable samples")),
            }
        }
        let trchi = trchi_check_sup(fan).unwrap_or_else(|e| {
            skipped.push(format!("trchi_check: {e}"));
            f64::NAN
        });
        let d2 = match d2_growth(&sim.tracker.history, sim.tracker.thresholds.mu_stop) {
            Ok(g) => Some(g),
            Err(e) => {
                skipped.push(format!("d2_growth: {e}"));
                None
            }
        };
        let e1 = sim.outcome.state.energy(sim.params.p);
        let energy_drift = if sim.initial_energy > 0.0 {
            (e1 - sim.initial_energy).abs() / sim.initial_energy
        } else {
            0.0
        };
        Self {
            mu_min: sim.tracker.history.iter().map(|h| h.mu_min).fold(f64::INFINITY, f64::min),
            jac_gap: jacobian_gap(fan),
            asymptotic_gap: asymptotic_gap(fan, &sim.params, &sim.phi1),
            trchi_check_sup: trchi,
            transport,
            energy,
            energy_drift,
            d2_growth: d2,
            skipped,
        }
    }
}

/// Outcome of [`run_single`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    /// Parameters with the amplitude actually used.
    pub params: PulseParams,
    pub q_max: f64,
    /// Zero of the line through the last `mu_min` samples.
    pub t_blow_measured: Option<f64>,
    pub t_blow_predicted: Option<f64>,
    pub t_star: f64,
    pub trigger: Option<BlowupTrigger>,
    pub u_star_measured: Option<f64>,
    pub s_star_predicted: Option<f64>,
    pub mu_min_history: Vec<(f64, f64)>,
    pub final_t: f64,
    pub steps: usize,
    pub last_dt: f64,
    pub events: Vec<SolverEvent>,
    pub diagnostics: RunDiagnostics,
    /// Files written, relative to the output directory.
    pub manifest: Vec<PathBuf>,
}

impl BlowupReport {
    pub fn from_simulation(sim: &Simulation) -> Self {
        let event = sim.tracker.event;
        let crit = critical_data(&sim.params);
        let q_max = max_shock_quantity(&sim.phi1, sim.params.p, S_GRID_SAMPLES).0.max(0.0);
        Self {
            params: sim.params,
            q_max,
            t_blow_measured: event.and_then(|e| e.t_blow_extrapolated),
            t_blow_predicted: sim.prediction.and_then(|p| p.t_blow_pred),
            t_star: crit.t_star,
            trigger: event.map(|e| e.trigger),
            u_star_measured: event.map(|e| e.u_star),
            s_star_predicted: sim.prediction.map(|p| p.s_pred),
            mu_min_history: sim.tracker.mu_history(),
            final_t: sim.outcome.state.t,
            steps: sim.outcome.steps,
            last_dt: sim.outcome.last_dt,
            events: sim.outcome.events.clone(),
            diagnostics: RunDiagnostics::compute(sim),
            manifest: Vec::new(),
        }
    }

    /// First solver event other than a requested stop.
    pub fn failure(&self) -> Option<&SolverEvent> {
        self.events.iter().find(|e| !matches!(e, SolverEvent::ObserverStop { .. }))
    }

    /// `t_blow_measured <= t* + slack_steps * dt`; `None` without a measurement.
    pub fn within_t_star(&self, slack_steps: f64) -> Option<bool> {
        self.t_blow_measured
            .map(|t| t <= self.t_star + slack_steps * self.last_dt)
    }

    pub fn to_text(&self) -> String {
        let d = &self.diagnostics;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("delta", fmt_f(self.params.delta));
        kv("eps0", fmt_f(self.params.eps0));
        kv("p", self.params.p.to_string());
        kv("amplitude", fmt_f(self.params.amplitude));
        kv("q_max", fmt_f(self.q_max));
        kv("t_star", fmt_f(self.t_star));
        kv("t_blow_measured", fmt_opt(self.t_blow_measured));
        kv("t_blow_predicted", fmt_opt(self.t_blow_predicted));
        kv("trigger", self.trigger.map_or("none", |t| t.as_str()).to_string());
        kv("u_star_measured", fmt_opt(self.u_star_measured));
        kv("s_star_predicted", fmt_opt(self.s_star_predicted));
        kv("final_t", fmt_f(self.final_t));
        kv("steps", self.steps.to_string());
        kv("last_dt", fmt_f(self.last_dt));
        kv("mu_min", fmt_f(d.mu_min));
        kv("jac_gap", fmt_f(d.jac_gap));
        kv("asymptotic_gap", fmt_f(d.asymptotic_gap));
        kv("trchi_check_sup", fmt_f(d.trchi_check_sup));
        for r in d.transport.iter().chain(&d.energy) {
            kv(&format!("{}.max", r.name), fmt_f(r.max_abs));
            kv(&format!("{}.rms", r.name), fmt_f(r.l2));
        }
        kv("energy_drift", fmt_f(d.energy_drift));
        if let Some(g) = &d.d2_growth {
            kv("d2_growth.slope", fmt_f(g.slope));
            kv("d2_growth.correlation", fmt_f(g.correlation));
            kv("d2_growth.monotone", g.monotone.to_string());
        }
        for s in &d.skipped {
            kv("skipped", s.clone());
        }
        for e in &self.events {
            kv("event", format!("{e:?}"));
        }
        for f in &self.manifest {
            kv("file", f.display().to_string());
        }
        out
    }
}

fn thin_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    (0..max)
        .map(|k| ((k as f64 * (n - 1) as f64 / (max - 1) as f64).round()) as usize)
        .collect()
}

fn fan_csv(fan: &CharacteristicFan) -> Result<String> {
    let mut out = String::from("t,u,r,c,mu_ode,mu_jac,trchi,trchi_check\n");
    for k in thin_indices(fan.samples.len(), FAN_CSV_MAX_SAMPLES) {
        let s = &fan.samples[k];
        for (pt, &u) in s.points.iter().zip(&fan.labels) {
            let (trchi, check) = trchi_pair(s.t, u, pt.r, pt.c)?;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_f(s.t),
                fmt_f(u),
                fmt_f(pt.r),
                fmt_f(pt.c),
                fmt_f(pt.mu_ode),
                fmt_f(pt.mu_jac),
                fmt_f(trchi),
                fmt_f(check)
            );
        }
    }
    Ok(out)
}

fn muhist_csv(history: &[MuSample]) -> String {
    let mut out = String::from("t,mu_min,u_argmin,max_drv\n");
    for h in history {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f(h.t),
            fmt_f(h.mu_min),
            fmt_f(h.u_argmin),
            fmt_f(h.max_drv)
        );
    }
    out
}

fn mu_plot(sim: &Simulation) -> String {
    let history = sim.tracker.mu_history();
    let mut series = vec![Series::new("mu_min", history.clone())];
    if let Some(pred) = sim.prediction.filter(|p| p.t_blow_pred.is_some()) {
        let p = sim.params.p;
        series.push(Series::new(
            "leading order",
            history.iter().map(|&(t, _)| (t, pred.mu_at(t, p))).collect(),
        ));
    }
    LineChart {
        title: format!("min mu, p = {}, delta = {}", sim.params.p, sim.params.delta),
        x_label: "t".into(),
        y_label: "mu_min".into(),
        series,
        ..Default::default()
    }
    .render()
}

fn fan_plot(sim: &Simulation) -> String {
    let fan = sim.fan();
    let m = fan.len() - 1;
    let stride = (m / (FAN_PLOT_LINES - 1)).max(1);
    let series = (0..=m)
        .step_by(stride)
        .map(|j| {
            let traj = fan.trajectory(j);
            let pts = thin_indices(traj.len(), 400)
                .into_iter()
                .map(|k| (traj[k].0, traj[k].1 - traj[k].0))
                .collect();
            Series::new("", pts)
        })
        .collect();
    LineChart {
        title: "outgoing characteristics".into(),
        x_label: "t".into(),
        y_label: "r - t".into(),
        series,
        ..Default::default()
    }
    .render()
}

/// Write `fan.csv`, `muhist.csv`, the plots and `report.txt` into `dir`.
pub fn write_outputs(sim: &Simulation, report: &mut BlowupReport, dir: &Path) -> Result<()> {
    write_file(dir, "fan.csv", &fan_csv(sim.fan())?, &mut report.manifest)?;
    write_file(dir, "muhist.csv", &muhist_csv(&sim.tracker.history), &mut report.manifest)?;
    write_file(dir, "mu_min.svg", &mu_plot(sim), &mut report.manifest)?;
    write_file(dir, "fan.svg", &fan_plot(sim), &mut report.manifest)?;
    report.manifest.push(PathBuf::from("report.txt"));
    let text = report.to_text();
    let path = dir.join("report.txt");
    std::fs::write(&path, text).map_err(|e| crate::error::Error::io(&path, e))
}

/// Build data, evolve with fan tracking, run the diagnostics and write the
/// run's files into `config.output_dir`.
pub fn run_single(config: &RunConfig) -> Result<BlowupReport> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    config.echo_into(dir)?;
    let params = config.resolve_params()?;
    let grid = base_grid(config, params.delta)?;
    let sim = simulate(config, &params, grid, config.fan_count, config.time.t_max)?;
    let mut report = BlowupReport::from_simulation(&sim);
    report.manifest.push(PathBuf::from("config.txt"));
    write_outputs(&sim, &mut report, dir)?;
    Ok(report)
}
