//! Outgoing characteristics, the inverse foliation density `mu` and the radial
//! null frame of the acoustic metric `g = -c^2 dt^2 + dr^2 + r^2 dS^2`.

use crate::error::{Error, Result};
use crate::grid::interp_cubic;
use crate::pulse_data::PulseParams;
use crate::radial_solver::{
    detect_blowup, wave_speed, BlowupEvent, BlowupThresholds, Control, FieldState, StateDerivatives,
    EXTRAPOLATION_SAMPLES,
    StepObserver,
};

/// Default number of fan intervals `M`.
pub const DEFAULT_FAN_COUNT: usize = 128;

/// Field values (and first derivatives) at one spacetime point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointFields {
    pub v: f64,
    pub w: f64,
    pub v_t: f64,
    pub v_r: f64,
    pub w_r: f64,
}

/// Wave-speed derivatives implied by [`PointFields`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedJet {
    pub c: f64,
    pub c_t: f64,
    pub c_r: f64,
}

impl SpeedJet {
    /// `L c = c_t + c c_r`
    pub fn lc(&self) -> f64 {
        self.c_t + self.c * self.c_r
    }
}

pub fn speed_jet(f: &PointFields, p: u32) -> Result<SpeedJet> {
    let c = wave_speed(f.v, p)?;
    // d c / d v = -(p/2) c^3 v^(p-1)
    let vp1 = if p == 1 { 1.0 } else { f.v.powi(p as i32 - 1) };
    let dc_dv = -0.5 * p as f64 * c * c * c * vp1;
    Ok(SpeedJet {
        c,
        c_t: dc_dv * f.v_t,
        c_r: dc_dv * f.v_r,
    })
}

/// Source of field values along characteristics.
pub trait FieldSampler {
    fn sample(&self, t: f64, r: f64) -> Result<PointFields>;
    /// Interval of `r` on which samples are trustworthy.
    fn interior(&self) -> (f64, f64);
}

/// Samples one grid state by spatial interpolation only.
pub struct StateSampler<'a>(pub &'a StateDerivatives);

impl FieldSampler for StateSampler<'_> {
    fn sample(&self, _t: f64, r: f64) -> Result<PointFields> {
        let d = self.0;
        let g = &d.grid;
        Ok(PointFields {
            v: interp_cubic(g, &d.v, r),
            w: interp_cubic(g, &d.w, r),
            v_t: interp_cubic(g, &d.v_t, r),
            v_r: interp_cubic(g, &d.v_r, r),
            w_r: interp_cubic(g, &d.w_r, r),
        })
    }

    fn interior(&self) -> (f64, f64) {
        interior_of(&self.0.grid)
    }
}

fn interior_of(grid: &crate::grid::RadialGrid) -> (f64, f64) {
    let margin = 2.0 * grid.dr();
    (grid.r_min + margin, grid.r_max - margin)
}

/// Fields between two time levels: spatial interpolation at both ends,
/// cubic Hermite in time using the semi-discrete time derivatives.
pub struct StepSlab<'a> {
    pub start: &'a StateDerivatives,
    pub end: &'a StateDerivatives,
}

fn hermite(theta: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + theta) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

impl FieldSampler for StepSlab<'_> {
    fn sample(&self, t: f64, r: f64) -> Result<PointFields> {
        let (a, b) = (self.start, self.end);
        let h = b.t - a.t;
        let theta = if h > 0.0 { (t - a.t) / h } else { 0.0 };
        let at = |d: &StateDerivatives, f: &[f64]| interp_cubic(&d.grid, f, r);
        if theta <= 0.0 {
            return StateSampler(a).sample(t, r);
        }
        if theta >= 1.0 {
            return StateSampler(b).sample(t, r);
        }
        let v = hermite(theta, h, at(a, &a.v), at(a, &a.v_t), at(b, &b.v), at(b, &b.v_t));
        let v_t = hermite(theta, h, at(a, &a.v_t), at(a, &a.v_tt), at(b, &b.v_t), at(b, &b.v_tt));
        let v_r = hermite(theta, h, at(a, &a.v_r), at(a, &a.v_rt), at(b, &b.v_r), at(b, &b.v_rt));
        // w_t = v_r
        let w = hermite(theta, h, at(a, &a.w), at(a, &a.v_r), at(b, &b.w), at(b, &b.v_r));
        let w_r = (1.0 - theta) * at(a, &a.w_r) + theta * at(b, &b.w_r);
        Ok(PointFields { v, w, v_t, v_r, w_r })
    }

    fn interior(&self) -> (f64, f64) {
        interior_of(&self.start.grid)
    }
}

/// One characteristic at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanPoint {
    pub r: f64,
    pub c: f64,
    pub mu_ode: f64,
    pub mu_jac: f64,
    pub trchi: f64,
    pub fields: PointFields,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanSample {
    pub t: f64,
    pub points: Vec<FanPoint>,
}

impl FanSample {
    /// `(min_j mu_ode, index)`
    pub fn mu_min(&self) -> (f64, usize) {
        self.points
            .iter()
            .enumerate()
            .fold((f64::INFINITY, 0), |acc, (j, pt)| {
                if pt.mu_ode < acc.0 {
                    (pt.mu_ode, j)
                } else {
                    acc
                }
            })
    }
}

/// Outgoing characteristics labelled by `u_j = j delta / M`, with their
/// sampled history.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFan {
    pub labels: Vec<f64>,
    pub p: u32,
    pub samples: Vec<FanSample>,
}

impl CharacteristicFan {
    pub fn latest(&self) -> Option<&FanSample> {
        self.samples.last()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sample whose time is closest to `t`.
    pub fn sample_near(&self, t: f64) -> Option<&FanSample> {
        let k = self.samples.partition_point(|s| s.t < t);
        let after = self.samples.get(k);
        let before = k.checked_sub(1).and_then(|i| self.samples.get(i));
        match (before, after) {
            (Some(b), Some(a)) => Some(if (t - b.t).abs() <= (a.t - t).abs() { b } else { a }),
            (b, a) => b.or(a),
        }
    }

    fn sample_at(&self, t: f64) -> Result<&FanSample> {
        let s = self
            .sample_near(t)
            .ok_or_else(|| Error::NeedsMoreSamples("fan has no samples".into()))?;
        if (s.t - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "t = {t} is not a fan sample time (nearest {})",
                s.t
            )));
        }
        Ok(s)
    }

    /// Time series `(t, r, mu_ode)` of characteristic `j`.
    pub fn trajectory(&self, j: usize) -> Vec<(f64, f64, f64)> {
        self.samples
            .iter()
            .map(|s| (s.t, s.points[j].r, s.points[j].mu_ode))
            .collect()
    }
}

/// Characteristics at `t = 1`: `r = 1 - u`, `mu = c`, `trchi = 2c/(1 - u)`.
pub fn seed_fan(params: &PulseParams, state: &FieldState, count: usize) -> Result<CharacteristicFan> {
    if count < 8 {
        return Err(Error::InvalidParameter(format!(
            "fan needs at least 8 intervals, got {count}"
        )));
    }
    let derivs = StateDerivatives::compute(state, params.p)?;
    seed_fan_from(params.delta, params.p, state.t, &StateSampler(&derivs), count)
}

pub(crate) fn seed_fan_from(
    delta: f64,
    p: u32,
    t: f64,
    sampler: &dyn FieldSampler,
    count: usize,
) -> Result<CharacteristicFan> {
    let labels: Vec<f64> = (0..=count).map(|j| j as f64 * delta / count as f64).collect();
    let points = labels
        .iter()
        .map(|&u| {
            let r = 1.0 - u;
            let fields = sampler.sample(t, r)?;
            let c = wave_speed(fields.v, p)?;
            Ok(FanPoint {
                r,
                c,
                mu_ode: c,
                mu_jac: c,
                trchi: 2.0 * c / r,
                fields,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CharacteristicFan {
        labels,
        p,
        samples: vec![FanSample { t, points }],
    })
}

/// Right-hand side of `dr/dt = c`, `dmu/dt = (c^-1 Lc + c_r) mu`.
fn characteristic_rhs(sampler: &dyn FieldSampler, p: u32, t: f64, r: f64, mu: f64) -> Result<(f64, f64)> {
    let jet = speed_jet(&sampler.sample(t, r)?, p)?;
    Ok((jet.c, (jet.lc() / jet.c + jet.c_r) * mu))
}

fn check_inside(sampler: &dyn FieldSampler, u: f64, r: f64) -> Result<()> {
    let (lo, hi) = sampler.interior();
    if !(r >= lo && r <= hi) {
        return Err(Error::FanEscape { u, r });
    }
    Ok(())
}

/// Advance every characteristic from the fan's last sample time to `t1`
/// with one RK4 step, using `sampler` for the fields.
pub fn advance_fan_with(fan: &mut CharacteristicFan, sampler: &dyn FieldSampler, t1: f64) -> Result<()> {
    let last = fan
        .latest()
        .ok_or_else(|| Error::NeedsMoreSamples("fan has no samples".into()))?;
    let t0 = last.t;
    let h = t1 - t0;
    let p = fan.p;
    let mut rs = Vec::with_capacity(fan.len());
    let mut mus = Vec::with_capacity(fan.len());
    for (pt, &u) in last.points.iter().zip(&fan.labels) {
        let (r0, m0) = (pt.r, pt.mu_ode);
        let f = |t: f64, r: f64, m: f64| {
            check_inside(sampler, u, r)?;
            characteristic_rhs(sampler, p, t, r, m)
        };
        let k1 = f(t0, r0, m0)?;
        let k2 = f(t0 + 0.5 * h, r0 + 0.5 * h * k1.0, m0 + 0.5 * h * k1.1)?;
        let k3 = f(t0 + 0.5 * h, r0 + 0.5 * h * k2.0, m0 + 0.5 * h * k2.1)?;
        let k4 = f(t1, r0 + h * k3.0, m0 + h * k3.1)?;
        let r1 = r0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        check_inside(sampler, u, r1)?;
        rs.push(r1);
        mus.push(m0 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1));
    }
    let mut points = Vec::with_capacity(fan.len());
    for (&r, &mu_ode) in rs.iter().zip(&mus) {
        let fields = sampler.sample(t1, r)?;
        let c = wave_speed(fields.v, p)?;
        points.push(FanPoint {
            r,
            c,
            mu_ode,
            mu_jac: 0.0,
            trchi: 2.0 * c / r,
            fields,
        });
    }
    let jac = jacobian_mu(&fan.labels, &points);
    for (pt, m) in points.iter_mut().zip(jac) {
        pt.mu_jac = m;
    }
    fan.samples.push(FanSample { t: t1, points });
    Ok(())
}

/// Advance the fan across one solver step between two grid states.
pub fn advance_fan(fan: &mut CharacteristicFan, start: &StateDerivatives, end: &StateDerivatives) -> Result<()> {
    let last_t = fan.latest().map(|s| s.t).unwrap_or(f64::NAN);
    if (last_t - start.t).abs() > 1e-12 * start.t.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "fan is at t = {last_t} but the step starts at t = {}",
            start.t
        )));
    }
    advance_fan_with(fan, &StepSlab { start, end }, end.t)
}

/// `mu = c (r_{j-1} - r_{j+1}) / (u_{j+1} - u_{j-1})`, one-sided second order at the edges.
fn jacobian_mu(labels: &[f64], points: &[FanPoint]) -> Vec<f64> {
    let n = labels.len();
    let r = |j: usize| points[j].r;
    (0..n)
        .map(|j| {
            let dr_du = if j == 0 {
                let (h1, h2) = (labels[1] - labels[0], labels[2] - labels[0]);
                // quadratic through three points, derivative at the first
                (-(h1 + h2) / (h1 * h2)) * r(0) + h2 / (h1 * (h2 - h1)) * r(1)
                    - h1 / (h2 * (h2 - h1)) * r(2)
            } else if j == n - 1 {
                let (h1, h2) = (labels[n - 1] - labels[n - 2], labels[n - 1] - labels[n - 3]);
                ((h1 + h2) / (h1 * h2)) * r(n - 1) - h2 / (h1 * (h2 - h1)) * r(n - 2)
                    + h1 / (h2 * (h2 - h1)) * r(n - 3)
            } else {
                (r(j + 1) - r(j - 1)) / (labels[j + 1] - labels[j - 1])
            };
            -points[j].c * dr_du
        })
        .collect()
}

/// Jacobian estimate of `mu` at sample time `t`; signed, so a negative value
/// marks crossed characteristics.
pub fn mu_jacobian(fan: &CharacteristicFan, t: f64) -> Result<Vec<f64>> {
    if fan.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Jacobian needs 3 characteristics, fan has {}",
            fan.len()
        )));
    }
    let s = fan.sample_at(t)?;
    Ok(jacobian_mu(&fan.labels, &s.points))
}

/// `(trchi, trchi_check)` per characteristic at sample time `t`, with
/// `trchi = 2c/r` and `trchi_check = trchi - 2/(t - u)`.
pub fn trchi_check(fan: &CharacteristicFan, t: f64) -> Result<Vec<(f64, f64)>> {
    let s = fan.sample_at(t)?;
    s.points
        .iter()
        .zip(&fan.labels)
        .map(|(pt, &u)| trchi_pair(s.t, u, pt.r, pt.c))
        .collect()
}

pub fn trchi_pair(t: f64, u: f64, r: f64, c: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("area radius must be positive, got {r}")));
    }
    let trchi = 2.0 * c / r;
    Ok((trchi, trchi - 2.0 / (t - u)))
}

/// Radial null frame in the coordinate basis `(d_t, d_r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullFrame {
    pub c: f64,
    pub mu: f64,
    pub l: [f64; 2],
    pub lbar: [f64; 2],
    pub t: [f64; 2],
    pub t_hat: [f64; 2],
}

impl NullFrame {
    /// Radial part of the acoustic metric, `-c^2 a_t b_t + a_r b_r`.
    pub fn g(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        -self.c * self.c * a[0] * b[0] + a[1] * b[1]
    }
}

pub fn null_frame(mu: f64, c: f64) -> Result<NullFrame> {
    if !(mu > 0.0 && c > 0.0) {
        return Err(Error::Domain(format!(
            "null frame needs mu > 0 and c > 0, got mu = {mu}, c = {c}"
        )));
    }
    let l = [1.0, c];
    let t = [0.0, -mu / c];
    let lbar = [mu / (c * c) * l[0] + 2.0 * t[0], mu / (c * c) * l[1] + 2.0 * t[1]];
    Ok(NullFrame {
        c,
        mu,
        l,
        lbar,
        t,
        t_hat: [0.0, -1.0],
    })
}

/// One row of the `mu_min` history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSample {
    pub t: f64,
    pub mu_min: f64,
    pub u_argmin: f64,
    pub max_drv: f64,
}

/// Observer that advances a fan alongside the solver and stops it at blow-up.
pub struct FanTracker {
    pub fan: CharacteristicFan,
    pub history: Vec<MuSample>,
    pub thresholds: BlowupThresholds,
    pub event: Option<BlowupEvent>,
    cache: Option<StateDerivatives>,
}

impl FanTracker {
    pub fn new(fan: CharacteristicFan, initial: &FieldState, thresholds: BlowupThresholds) -> Result<Self> {
        let derivs = StateDerivatives::compute(initial, fan.p)?;
        let mut tracker = Self {
            fan,
            history: Vec::new(),
            thresholds,
            event: None,
            cache: None,
        };
        tracker.record(&derivs);
        tracker.cache = Some(derivs);
        Ok(tracker)
    }

    fn record(&mut self, d: &StateDerivatives) {
        let Some(sample) = self.fan.latest() else { return };
        let (mu_min, j) = sample.mu_min();
        let max_drv = d.v_r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.history.push(MuSample {
            t: sample.t,
            mu_min,
            u_argmin: self.fan.labels[j],
            max_drv,
        });
    }

    pub fn mu_history(&self) -> Vec<(f64, f64)> {
        self.history.iter().map(|h| (h.t, h.mu_min)).collect()
    }
}

impl StepObserver for FanTracker {
    fn on_step(&mut self, prev: &FieldState, next: &FieldState) -> Result<Control> {
        let p = self.fan.p;
        let start = match self.cache.take() {
            Some(d) if d.t == prev.t => d,
            _ => StateDerivatives::compute(prev, p)?,
        };
        let end = StateDerivatives::compute(next, p)?;
        advance_fan(&mut self.fan, &start, &end)?;
        self.record(&end);
        let max_drv = self.history.last().map(|h| h.max_drv).unwrap_or(0.0);
        self.cache = Some(end);
        let tail: Vec<(f64, f64)> = self.history[self.history.len().saturating_sub(EXTRAPOLATION_SAMPLES)..]
            .iter()
            .map(|h| (h.t, h.mu_min))
            .collect();
        if let Some(ev) = detect_blowup(&self.fan, &tail, max_drv, &self.thresholds) {
            let reason = format!("blow-up ({}) at t = {}", ev.trigger.as_str(), ev.t);
            self.event = Some(ev);
            return Ok(Control::Stop(reason));
        }
        Ok(Control::Continue)
    }
}
