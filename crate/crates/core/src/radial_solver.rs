//! Method-of-lines solver for the radial quasilinear wave equation
//! `-(1 + v^p) phi_tt + phi_rr + (2/r) phi_r = 0`, written for
//! `(phi, v = phi_t, w = phi_r)`.

use crate::acoustic_geometry::CharacteristicFan;
use crate::error::{Error, Result};
use crate::grid::{derivative, radial_divergence, RadialGrid};

/// Lower bound on `1 + v^p` (strict hyperbolicity guard).
pub const HYPERBOLICITY_FLOOR: f64 = 0.1;

/// Radial fields at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub grid: RadialGrid,
    pub phi: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl FieldState {
    pub fn new(t: f64, grid: RadialGrid, phi: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Self {
        assert!(phi.len() == grid.n_points && v.len() == grid.n_points && w.len() == grid.n_points);
        Self { t, grid, phi, v, w }
    }

    pub fn zeros(t: f64, grid: RadialGrid) -> Self {
        let n = grid.n_points;
        Self::new(t, grid, vec![0.0; n], vec![0.0; n], vec![0.0; n])
    }

    pub fn is_finite(&self) -> bool {
        self.phi
            .iter()
            .chain(&self.v)
            .chain(&self.w)
            .all(|x| x.is_finite())
    }

    /// Largest wave speed on the grid.
    pub fn max_speed(&self, p: u32) -> Result<f64> {
        self.v
            .iter()
            .try_fold(0.0f64, |m, &v| Ok(m.max(wave_speed(v, p)?)))
    }

    /// `max |d_r v|` with the solver's derivative stencil.
    pub fn max_dr_v(&self) -> f64 {
        let mut d = vec![0.0; self.v.len()];
        derivative(&self.v, self.grid.dr(), &mut d);
        d.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Discrete linear energy `sum (c^-2 v^2 + w^2) r^2 dr`.
    pub fn energy(&self, p: u32) -> f64 {
        let dr = self.grid.dr();
        (0..self.grid.n_points)
            .map(|i| {
                let r = self.grid.r(i);
                let h = 1.0 + self.v[i].powi(p as i32);
                (h * self.v[i] * self.v[i] + self.w[i] * self.w[i]) * r * r * dr
            })
            .sum()
    }

    /// Radial interval outside of which `|v|` and `|w|` stay below `tol`.
    pub fn support(&self, tol: f64) -> Option<(f64, f64)> {
        let active = |i: &usize| self.v[*i].abs() > tol || self.w[*i].abs() > tol;
        let first = (0..self.grid.n_points).find(active)?;
        let last = (0..self.grid.n_points).rev().find(active)?;
        Some((self.grid.r(first), self.grid.r(last)))
    }

    /// Max of `|v|, |w|` over `cells` nodes at each end of the grid.
    pub fn boundary_activity(&self, cells: usize) -> f64 {
        let n = self.grid.n_points;
        (0..cells.min(n))
            .chain(n.saturating_sub(cells)..n)
            .map(|i| self.v[i].abs().max(self.w[i].abs()))
            .fold(0.0, f64::max)
    }
}

/// Wave speed `c = (1 + v^p)^(-1/2)`.
pub fn wave_speed(v: f64, p: u32) -> Result<f64> {
    let h = 1.0 + v.powi(p as i32);
    if !(h > HYPERBOLICITY_FLOOR) {
        return Err(Error::HyperbolicityLoss { v, p });
    }
    Ok(1.0 / h.sqrt())
}

/// Time derivatives of `(phi, v, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub dphi_dt: Vec<f64>,
    pub dv_dt: Vec<f64>,
    pub dw_dt: Vec<f64>,
}

fn rhs_into(state: &FieldState, p: u32, out: &mut Rhs) -> Result<()> {
    let grid = &state.grid;
    out.dphi_dt.copy_from_slice(&state.v);
    radial_divergence(grid, &state.w, &mut out.dv_dt);
    for (dv, &v) in out.dv_dt.iter_mut().zip(&state.v) {
        let h = 1.0 + v.powi(p as i32);
        if !(h > HYPERBOLICITY_FLOOR) {
            return Err(Error::HyperbolicityLoss { v, p });
        }
        *dv /= h;
    }
    derivative(&state.v, grid.dr(), &mut out.dw_dt);
    Ok(())
}

/// Semi-discrete right-hand side: `phi_t = v`, `v_t = c^2 r^-2 (r^2 w)_r`, `w_t = v_r`.
pub fn rhs(state: &FieldState, p: u32) -> Result<Rhs> {
    let n = state.grid.n_points;
    let mut out = Rhs {
        dphi_dt: vec![0.0; n],
        dv_dt: vec![0.0; n],
        dw_dt: vec![0.0; n],
    };
    rhs_into(state, p, &mut out)?;
    Ok(out)
}

/// Grid arrays needed to sample the fields and their time derivatives
/// between two time levels.
#[derive(Debug, Clone)]
pub struct StateDerivatives {
    pub t: f64,
    pub grid: RadialGrid,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub v_r: Vec<f64>,
    pub w_r: Vec<f64>,
    pub v_t: Vec<f64>,
    /// `d/dt v_r = (v_t)_r`
    pub v_rt: Vec<f64>,
    /// `d/dt v_t` of the semi-discrete system
    pub v_tt: Vec<f64>,
}

impl StateDerivatives {
    pub fn compute(state: &FieldState, p: u32) -> Result<Self> {
        let grid = state.grid;
        let dr = grid.dr();
        let n = grid.n_points;
        let r = rhs(state, p)?;
        let v_r = r.dw_dt;
        let v_t = r.dv_dt;
        let w_r = {
            let mut d = vec![0.0; n];
            derivative(&state.w, dr, &mut d);
            d
        };
        let mut v_rt = vec![0.0; n];
        derivative(&v_t, dr, &mut v_rt);
        let mut lap_vr = vec![0.0; n];
        radial_divergence(&grid, &v_r, &mut lap_vr);
        let v_tt = (0..n)
            .map(|i| {
                let v = state.v[i];
                let c2 = 1.0 / (1.0 + v.powi(p as i32));
                let dh = if p == 1 { 1.0 } else { p as f64 * v.powi(p as i32 - 1) };
                -dh * c2 * v_t[i] * v_t[i] + c2 * lap_vr[i]
            })
            .collect();
        Ok(Self {
            t: state.t,
            grid,
            v: state.v.clone(),
            w: state.w.clone(),
            v_r,
            w_r,
            v_t,
            v_rt,
            v_tt,
        })
    }
}

/// Time-step control for [`evolve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    /// `dt = cfl * dr / c_max`
    pub cfl: f64,
    /// Observers run every `observer_stride` steps (and on the final step).
    pub observer_stride: usize,
    pub max_steps: usize,
}

impl Default for StepRule {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            observer_stride: 1,
            max_steps: 10_000_000,
        }
    }
}

pub enum Control {
    Continue,
    Stop(String),
}

/// Hook invoked during [`evolve`]; `prev` is the state at the previous
/// observer call (or the initial state).
pub trait StepObserver {
    fn on_step(&mut self, prev: &FieldState, next: &FieldState) -> Result<Control>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverEvent {
    HyperbolicityLoss { t: f64, v: f64, p: u32 },
    NumericFailure { t: f64 },
    ObserverStop { t: f64, reason: String },
    ObserverError { t: f64, error: Error },
    StepLimit { t: f64 },
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    /// Last valid state.
    pub state: FieldState,
    pub events: Vec<SolverEvent>,
    pub steps: usize,
    pub last_dt: f64,
}

impl EvolveOutcome {
    pub fn halted(&self) -> bool {
        !self.events.is_empty()
    }
}

fn axpy(out: &mut FieldState, base: &FieldState, k: &Rhs, a: f64) {
    for i in 0..base.grid.n_points {
        out.phi[i] = base.phi[i] + a * k.dphi_dt[i];
        out.v[i] = base.v[i] + a * k.dv_dt[i];
        out.w[i] = base.w[i] + a * k.dw_dt[i];
    }
}

/// Classical RK4 step of size `dt`.
pub fn rk4_step(state: &FieldState, p: u32, dt: f64) -> Result<FieldState> {
    let n = state.grid.n_points;
    let new_rhs = || Rhs {
        dphi_dt: vec![0.0; n],
        dv_dt: vec![0.0; n],
        dw_dt: vec![0.0; n],
    };
    let (mut k1, mut k2, mut k3, mut k4) = (new_rhs(), new_rhs(), new_rhs(), new_rhs());
    let mut stage = state.clone();
    rhs_into(state, p, &mut k1)?;
    axpy(&mut stage, state, &k1, 0.5 * dt);
    rhs_into(&stage, p, &mut k2)?;
    axpy(&mut stage, state, &k2, 0.5 * dt);
    rhs_into(&stage, p, &mut k3)?;
    axpy(&mut stage, state, &k3, dt);
    rhs_into(&stage, p, &mut k4)?;
    let w6 = dt / 6.0;
    for i in 0..n {
        stage.phi[i] = state.phi[i]
            + w6 * (k1.dphi_dt[i] + 2.0 * k2.dphi_dt[i] + 2.0 * k3.dphi_dt[i] + k4.dphi_dt[i]);
        stage.v[i] =
            state.v[i] + w6 * (k1.dv_dt[i] + 2.0 * k2.dv_dt[i] + 2.0 * k3.dv_dt[i] + k4.dv_dt[i]);
        stage.w[i] =
            state.w[i] + w6 * (k1.dw_dt[i] + 2.0 * k2.dw_dt[i] + 2.0 * k3.dw_dt[i] + k4.dw_dt[i]);
    }
    stage.t = state.t + dt;
    Ok(stage)
}

/// Integrate from `state.t` to `t_end` with RK4 and CFL-limited steps.
///
/// Integration halts early on hyperbolicity loss, non-finite fields, an
/// observer error or an observer stop request; each halt is logged.
pub fn evolve(
    state: FieldState,
    p: u32,
    t_end: f64,
    rule: &StepRule,
    observers: &mut [&mut dyn StepObserver],
) -> Result<EvolveOutcome> {
    if !(rule.cfl > 0.0 && rule.cfl < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "CFL number must lie in (0, 1), got {}",
            rule.cfl
        )));
    }
    if t_end < state.t {
        return Err(Error::InvalidParameter(format!(
            "t_end = {t_end} precedes the state time {}",
            state.t
        )));
    }
    let stride = rule.observer_stride.max(1);
    let dr = state.grid.dr();
    let mut current = state;
    let mut observed = current.clone();
    let mut events = Vec::new();
    let mut steps = 0;
    let mut last_dt = 0.0;
    let time_eps = 1e-13 * t_end.abs().max(1.0);

    while t_end - current.t > time_eps {
        if steps >= rule.max_steps {
            events.push(SolverEvent::StepLimit { t: current.t });
            break;
        }
        let c_max = match current.max_speed(p) {
            Ok(c) => c,
            Err(Error::HyperbolicityLoss { v, p }) => {
                events.push(SolverEvent::HyperbolicityLoss { t: current.t, v, p });
                break;
            }
            Err(e) => return Err(e),
        };
        let mut dt = rule.cfl * dr / c_max;
        if current.t + dt > t_end - time_eps {
            dt = t_end - current.t;
        }
        let next = match rk4_step(&current, p, dt) {
            Ok(s) => s,
            Err(Error::HyperbolicityLoss { v, p }) => {
                events.push(SolverEvent::HyperbolicityLoss { t: current.t, v, p });
                break;
            }
            Err(e) => return Err(e),
        };
        if !next.is_finite() {
            events.push(SolverEvent::NumericFailure { t: next.t });
            break;
        }
        steps += 1;
        last_dt = dt;
        let is_last = t_end - next.t <= time_eps;
        current = next;
        if steps % stride == 0 || is_last {
            let mut stop = None;
            for obs in observers.iter_mut() {
                match obs.on_step(&observed, &current) {
                    Ok(Control::Continue) => {}
                    Ok(Control::Stop(reason)) => {
                        stop = Some(SolverEvent::ObserverStop {
                            t: current.t,
                            reason,
                        });
                        break;
                    }
                    Err(error) => {
                        stop = Some(SolverEvent::ObserverError {
                            t: current.t,
                            error,
                        });
                        break;
                    }
                }
            }
            observed = current.clone();
            if let Some(ev) = stop {
                events.push(ev);
                break;
            }
        }
    }
    Ok(EvolveOutcome {
        state: current,
        events,
        steps,
        last_dt,
    })
}

/// Thresholds for [`detect_blowup`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupThresholds {
    pub mu_stop: f64,
    /// Absolute cap on `max |d_r v|`.
    pub d2_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupTrigger {
    MuFloor,
    Crossing,
    SecondDerivativeCap,
}

impl BlowupTrigger {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlowupTrigger::MuFloor => "mu_floor",
            BlowupTrigger::Crossing => "crossing",
            BlowupTrigger::SecondDerivativeCap => "d2_cap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupEvent {
    pub t: f64,
    pub u_star: f64,
    pub trigger: BlowupTrigger,
    /// Linear extrapolation of the recent `mu_min(t)` samples to zero.
    pub t_blow_extrapolated: Option<f64>,
}

/// Number of trailing `(t, mu_min)` samples used for the blow-up time.
pub const EXTRAPOLATION_SAMPLES: usize = 10;

/// Zero of the least-squares line through the last `EXTRAPOLATION_SAMPLES`
/// points of `(t, mu_min)`; `None` when `mu_min` is not decreasing.
pub fn extrapolate_mu_zero(history: &[(f64, f64)]) -> Option<f64> {
    let tail = &history[history.len().saturating_sub(EXTRAPOLATION_SAMPLES)..];
    if tail.len() < 2 {
        return None;
    }
    let ts: Vec<f64> = tail.iter().map(|x| x.0).collect();
    let mus: Vec<f64> = tail.iter().map(|x| x.1).collect();
    let fit = crate::fit::fit_line(&ts, &mus).ok()?;
    if fit.slope >= 0.0 {
        return None;
    }
    Some(-fit.intercept / fit.slope)
}

/// Check the latest fan sample for loss of regularity.
///
/// `mu_history` holds `(t, min_u mu_ode)`; `max_dr_v` is the current
/// `max |d_r v|` on the grid.
pub fn detect_blowup(
    fan: &CharacteristicFan,
    mu_history: &[(f64, f64)],
    max_dr_v: f64,
    thresholds: &BlowupThresholds,
) -> Option<BlowupEvent> {
    let sample = fan.latest()?;
    let (j_min, mu_min) = sample
        .points
        .iter()
        .enumerate()
        .map(|(j, pt)| (j, pt.mu_ode))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let crossing = sample
        .points
        .windows(2)
        .position(|w| w[0].r <= w[1].r);
    let trigger = if let Some(j) = crossing {
        Some((BlowupTrigger::Crossing, j))
    } else if mu_min < thresholds.mu_stop {
        Some((BlowupTrigger::MuFloor, j_min))
    } else if max_dr_v > thresholds.d2_cap {
        Some((BlowupTrigger::SecondDerivativeCap, j_min))
    } else {
        None
    };
    trigger.map(|(trigger, j)| BlowupEvent {
        t: sample.t,
        u_star: fan.labels[j],
        trigger,
        t_blow_extrapolated: extrapolate_mu_zero(mu_history),
    })
}

/// Earliest time at which the light cone from the pulse shell `(1 - delta, 1)`
/// reaches within `cells` grid cells of either boundary, for speed `c_max`.
pub fn causality_guard_time(grid: &RadialGrid, delta: f64, c_max: f64, cells: usize) -> f64 {
    let margin = cells as f64 * grid.dr();
    let inner = (1.0 - delta - grid.r_min - margin).max(0.0);
    let outer = (grid.r_max - 1.0 - margin).max(0.0);
    1.0 + inner.min(outer) / c_max
}
