//! Residual checks along the characteristic fan: null-frame algebra, the
//! transport equation for `Lbar psi`, the `V = L` energy identity and the
//! growth law of `d_r v` as `mu -> 0`.

use std::f64::consts::PI;
use std::fmt;

use crate::acoustic_geometry::{null_frame, speed_jet, CharacteristicFan, FanPoint, MuSample};
use crate::error::{Error, Result};
use crate::fit::{fit_log_log, observed_order};

/// Samples with `min mu` at or below this are excluded from residual checks.
pub const RESIDUAL_MU_FLOOR: f64 = 0.1;

/// Gradient component used as `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Psi {
    /// `d_t phi`
    V,
    /// `d_r phi`
    W,
}

impl fmt::Display for Psi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Psi::V => "v",
            Psi::W => "w",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub name: String,
    pub samples: usize,
    pub max_abs: f64,
    /// Root-mean-square residual.
    pub l2: f64,
    pub refinement_order: Option<f64>,
}

impl ResidualReport {
    pub fn from_values(name: impl Into<String>, values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut max_abs, mut sq) = (0usize, 0.0f64, 0.0);
        for x in values {
            n += 1;
            max_abs = max_abs.max(x.abs());
            sq += x * x;
        }
        Self {
            name: name.into(),
            samples: n,
            max_abs,
            l2: if n > 0 { (sq / n as f64).sqrt() } else { 0.0 },
            refinement_order: None,
        }
    }
}

/// Observed orders between successive refinement levels (ratio 2).
pub fn refinement_orders(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| observed_order(w[0], w[1])).collect()
}

/// Frame quantities of `psi` at one fan point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FrameValues {
    c: f64,
    mu: f64,
    trchi: f64,
    l_psi: f64,
    lbar_psi: f64,
    /// `mu` times the angular Laplacian of `psi`
    mu_lap_ang: f64,
    /// `|angular gradient of psi|^2`
    ang_grad_sq: f64,
    /// `mu box_g psi`
    source: f64,
    /// `L mu`
    l_mu: f64,
    /// `L c`
    l_c: f64,
}

fn frame_values(pt: &FanPoint, p: u32, psi: Psi) -> Result<FrameValues> {
    let f = &pt.fields;
    let jet = speed_jet(f, p)?;
    let c = jet.c;
    let mu = pt.mu_ode;
    let (psi_val, psi_t, psi_r) = match psi {
        Psi::V => (f.v, f.v_t, f.v_r),
        Psi::W => (f.w, f.v_r, f.w_r),
    };
    let l_psi = psi_t + c * psi_r;
    let t_psi = -mu / c * psi_r;
    let lbar_psi = mu / (c * c) * l_psi + 2.0 * t_psi;
    let l_v = f.v_t + c * f.v_r;
    let t_v = -mu / c * f.v_r;
    let vp1 = if p == 1 { 1.0 } else { f.v.powi(p as i32 - 1) };
    let pf = p as f64;
    let source = 0.5 * pf * mu * vp1 * l_v * l_psi + 0.5 * pf * c * c * vp1 * (l_v * t_psi + t_v * l_psi);
    // w = omega . grad phi is a vector component: angular terms from the sphere
    let r2 = pt.r * pt.r;
    let (mu_lap_ang, ang_grad_sq) = match psi {
        Psi::V => (0.0, 0.0),
        Psi::W => (-2.0 * mu * psi_val / r2, 2.0 * psi_val * psi_val / r2),
    };
    Ok(FrameValues {
        c,
        mu,
        trchi: 2.0 * c / pt.r,
        l_psi,
        lbar_psi,
        mu_lap_ang,
        ang_grad_sq,
        source,
        l_mu: (jet.lc() / c + jet.c_r) * mu,
        l_c: jet.lc(),
    })
}

/// Number of leading fan samples with `min mu > RESIDUAL_MU_FLOOR`.
fn usable_samples(fan: &CharacteristicFan) -> usize {
    fan.samples
        .iter()
        .take_while(|s| s.mu_min().0 > RESIDUAL_MU_FLOOR)
        .count()
}

/// Time differences are skipped where one neighbouring step is shorter than
/// this fraction of the other (e.g. a step clamped to hit an end time): the
/// three-point formula would divide sampling noise by the short step.
pub const MIN_SPACING_RATIO: f64 = 0.25;

/// Three-point derivative at the middle of nonuniform samples.
fn central_derivative(t: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

/// Residual of `(L + trchi/2) Lbar psi = mu lap_ang psi + H - F` along every
/// characteristic, with `L` of `Lbar psi` taken by time differences of the
/// stored samples.
pub fn transport_residual(fan: &CharacteristicFan, psi: Psi) -> Result<ResidualReport> {
    transport_residual_until(fan, psi, f64::INFINITY)
}

/// [`transport_residual`] restricted to samples with `t <= t_end`.
pub fn transport_residual_until(fan: &CharacteristicFan, psi: Psi, t_end: f64) -> Result<ResidualReport> {
    let usable = usable_samples(fan).min(fan.samples.partition_point(|s| s.t <= t_end));
    if usable < 3 {
        return Err(Error::NeedsMoreSamples(format!(
            "transport residual needs 3 samples with mu > {RESIDUAL_MU_FLOOR}, have {usable}"
        )));
    }
    let p = fan.p;
    let samples = &fan.samples[..usable];
    let frames = samples
        .iter()
        .map(|s| {
            s.points
                .iter()
                .map(|pt| frame_values(pt, p, psi))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut residuals = Vec::with_capacity((usable - 2) * fan.len());
    for k in 1..usable - 1 {
        let ts = [samples[k - 1].t, samples[k].t, samples[k + 1].t];
        let (h1, h2) = (ts[1] - ts[0], ts[2] - ts[1]);
        if h1.min(h2) < MIN_SPACING_RATIO * h1.max(h2) {
            continue;
        }
        for j in 0..fan.len() {
            let fr = &frames[k][j];
            let l_lbar = central_derivative(
                ts,
                [frames[k - 1][j].lbar_psi, fr.lbar_psi, frames[k + 1][j].lbar_psi],
            );
            let h = 0.5 / (fr.c * fr.c) * fr.mu * fr.trchi * fr.l_psi;
            let lhs = l_lbar + 0.5 * fr.trchi * fr.lbar_psi;
            residuals.push(lhs - (fr.mu_lap_ang + h - fr.source));
        }
    }
    Ok(ResidualReport::from_values(format!("transport[{psi}]"), residuals))
}

/// Energies and fluxes of the `V = L` and `V = Lbar` multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyFlux {
    pub e1: f64,
    pub f1: f64,
    pub e2: f64,
    pub f2: f64,
}

/// Composite Simpson on a uniform grid (trapezoid on a trailing odd interval).
fn integrate_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut sum = 0.0;
    let mut k = 0;
    while k < even {
        sum += h / 3.0 * (values[k] + 4.0 * values[k + 1] + values[k + 2]);
        k += 2;
    }
    if even < intervals {
        sum += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    sum
}

fn cumulative_trapezoid(ts: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..values.len() {
        acc += 0.5 * (ts[k] - ts[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc);
    }
    out
}

/// Index of the last label not exceeding `u`.
fn label_index(fan: &CharacteristicFan, u: f64) -> Result<usize> {
    let delta = *fan.labels.last().unwrap_or(&0.0);
    if !(u > 0.0 && u <= delta * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("u = {u} outside (0, {delta}]")));
    }
    let tol = 1e-9 * delta;
    Ok(fan.labels.iter().rposition(|&x| x <= u + tol).unwrap_or(0))
}

fn sample_index(fan: &CharacteristicFan, t: f64) -> Result<usize> {
    let k = fan.samples.partition_point(|s| s.t < t - 1e-12);
    if k >= fan.samples.len() || (fan.samples[k].t - t).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("t = {t} is not a fan sample time")));
    }
    Ok(k)
}

/// Per-sample u-integrals used by the energy identity.
struct SliceIntegrals {
    e1: f64,
    e2: f64,
    bulk: f64,
    /// `(L psi)^2 r^2 4 pi` and `mu |angular grad|^2 r^2 4 pi` on the last characteristic
    flux1: f64,
    flux2: f64,
}

fn slice_integrals(fan: &CharacteristicFan, k: usize, j_end: usize, psi: Psi) -> Result<SliceIntegrals> {
    let s = &fan.samples[k];
    let du = fan.labels[1] - fan.labels[0];
    let mut e1 = Vec::with_capacity(j_end + 1);
    let mut e2 = Vec::with_capacity(j_end + 1);
    let mut bulk = Vec::with_capacity(j_end + 1);
    let mut last = None;
    for j in 0..=j_end {
        let pt = &s.points[j];
        let fr = frame_values(pt, fan.p, psi)?;
        let area = 4.0 * PI * pt.r * pt.r;
        let c2 = fr.c * fr.c;
        e1.push(0.5 * (fr.mu / c2 * fr.l_psi * fr.l_psi + fr.mu * fr.ang_grad_sq) * area);
        e2.push(0.5 * (fr.lbar_psi * fr.lbar_psi + fr.mu * fr.mu / c2 * fr.ang_grad_sq) * area);
        let l_c2mu = -2.0 * fr.mu * fr.l_c / (c2 * fr.c) + fr.l_mu / c2;
        let integrand = -fr.source * fr.l_psi
            - 0.5 * l_c2mu * fr.l_psi * fr.l_psi
            - 0.5 * fr.trchi * fr.l_psi * fr.lbar_psi
            + 0.5 * fr.l_mu * fr.ang_grad_sq;
        bulk.push(integrand * area);
        last = Some((fr, area));
    }
    let (fr, area) = last.expect("at least one characteristic");
    Ok(SliceIntegrals {
        e1: integrate_uniform(&e1, du),
        e2: integrate_uniform(&e2, du),
        bulk: integrate_uniform(&bulk, du),
        flux1: fr.l_psi * fr.l_psi * area,
        flux2: fr.mu * fr.ang_grad_sq * area,
    })
}

/// `E_1, F_1, E_2, F_2` on `Sigma_t^u` and `C_u` up to time `t`.
pub fn energy_flux(fan: &CharacteristicFan, t: f64, u: f64, psi: Psi) -> Result<EnergyFlux> {
    let j_end = label_index(fan, u)?;
    let k_end = sample_index(fan, t)?;
    let slices = (0..=k_end)
        .map(|k| slice_integrals(fan, k, j_end, psi))
        .collect::<Result<Vec<_>>>()?;
    let ts: Vec<f64> = fan.samples[..=k_end].iter().map(|s| s.t).collect();
    let f1 = cumulative_trapezoid(&ts, &slices.iter().map(|s| s.flux1).collect::<Vec<_>>());
    let f2 = cumulative_trapezoid(&ts, &slices.iter().map(|s| s.flux2).collect::<Vec<_>>());
    Ok(EnergyFlux {
        e1: slices[k_end].e1,
        f1: f1[k_end],
        e2: slices[k_end].e2,
        f2: f2[k_end],
    })
}

/// Normalised residual of the `V = L` energy identity
/// `E_1(t) - E_1(1) + F_1(t) = bulk(t)`, evaluated at every sample up to `t`.
pub fn energy_identity_residual(fan: &CharacteristicFan, t: f64, u: f64, psi: Psi) -> Result<ResidualReport> {
    let j_end = label_index(fan, u)?;
    let k_end = sample_index(fan, t)?;
    let slices = (0..=k_end)
        .map(|k| slice_integrals(fan, k, j_end, psi))
        .collect::<Result<Vec<_>>>()?;
    let ts: Vec<f64> = fan.samples[..=k_end].iter().map(|s| s.t).collect();
    let f1 = cumulative_trapezoid(&ts, &slices.iter().map(|s| s.flux1).collect::<Vec<_>>());
    let bulk = cumulative_trapezoid(&ts, &slices.iter().map(|s| s.bulk).collect::<Vec<_>>());
    let e_init = slices[0].e1;
    let residuals = (1..=k_end).map(|k| {
        let lhs = slices[k].e1 - e_init + f1[k];
        (lhs - bulk[k]).abs() / slices[k].e1.max(1e-30)
    });
    Ok(ResidualReport::from_values(format!("energy[{psi}]"), residuals))
}

/// Worst relative violation of the null-frame identities over `(mu, c)` pairs.
pub fn null_frame_residual(states: &[(f64, f64)]) -> Result<ResidualReport> {
    let mut values = Vec::with_capacity(states.len());
    for &(mu, c) in states {
        let f = null_frame(mu, c)?;
        let scale_l = c * c;
        let worst = [
            f.g(f.l, f.l).abs() / scale_l,
            f.g(f.lbar, f.lbar).abs() / (mu * mu / (c * c)),
            (f.g(f.l, f.lbar) + 2.0 * mu).abs() / (2.0 * mu),
            (f.g(f.l, f.t) + mu).abs() / mu,
            (f.g(f.t, f.t) - mu * mu / (c * c)).abs() / (mu * mu / (c * c)),
            (f.l[0] - 1.0).abs(),
            (f.g(f.t_hat, f.t_hat) - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        values.push(worst);
    }
    Ok(ResidualReport::from_values("null_frame", values))
}

/// Fit of `log max|d_r v|` against `log(1/mu_min)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub slope: f64,
    pub correlation: f64,
    pub samples: usize,
    /// `max|d_r v|` never decreases while `mu_min` decreases in the window.
    pub monotone: bool,
}

/// Window upper edge for the growth fit.
pub const GROWTH_WINDOW_TOP: f64 = 0.5;

pub fn d2_growth(history: &[MuSample], mu_stop: f64) -> Result<GrowthReport> {
    let window: Vec<&MuSample> = history
        .iter()
        .filter(|h| h.mu_min >= mu_stop && h.mu_min <= GROWTH_WINDOW_TOP && h.max_drv > 0.0)
        .collect();
    if window.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "mu_min window [{mu_stop}, {GROWTH_WINDOW_TOP}] holds {} samples",
            window.len()
        )));
    }
    let inv_mu: Vec<f64> = window.iter().map(|h| 1.0 / h.mu_min).collect();
    let drv: Vec<f64> = window.iter().map(|h| h.max_drv).collect();
    let fit = fit_log_log(&inv_mu, &drv)?;
    let monotone = window.windows(2).all(|w| {
        w[1].mu_min > w[0].mu_min || w[1].max_drv >= w[0].max_drv * (1.0 - 1e-12)
    });
    Ok(GrowthReport {
        slope: fit.slope,
        correlation: fit.correlation,
        samples: window.len(),
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic_geometry::{FanSample, PointFields};

    fn flat_fan(fields: PointFields, count: usize, steps: usize) -> CharacteristicFan {
        let delta = 0.1;
        let labels: Vec<f64> = (0..=count).map(|j| j as f64 * delta / count as f64).collect();
        let samples = (0..=steps)
            .map(|k| {
                let t = 1.0 + 0.01 * k as f64;
                FanSample {
                    t,
                    points: labels
                        .iter()
                        .map(|&u| FanPoint {
                            r: t - u,
                            c: 1.0,
                            mu_ode: 1.0,
                            mu_jac: 1.0,
                            trchi: 2.0 / (t - u),
                            fields,
                        })
                        .collect(),
                }
            })
            .collect();
        CharacteristicFan { labels, p: 1, samples }
    }

    #[test]
    fn zero_fields_give_zero_residuals() {
        let fan = flat_fan(PointFields::default(), 16, 10);
        for psi in [Psi::V, Psi::W] {
            assert_eq!(transport_residual(&fan, psi).unwrap().max_abs, 0.0);
            assert_eq!(energy_identity_residual(&fan, 1.1, 0.1, psi).unwrap().max_abs, 0.0);
            assert_eq!(energy_flux(&fan, 1.05, 0.1, psi).unwrap(), EnergyFlux::default());
        }
    }

    #[test]
    fn constant_v_gives_zero_transport_residual() {
        let fields = PointFields {
            v: 0.3,
            ..PointFields::default()
        };
        let fan = flat_fan(fields, 16, 10);
        assert_eq!(transport_residual(&fan, Psi::V).unwrap().max_abs, 0.0);
    }

    #[test]
    fn clamped_step_is_skipped() {
        let mut fan = flat_fan(PointFields::default(), 16, 10);
        let full = transport_residual(&fan, Psi::V).unwrap().samples;
        let mut extra = fan.samples.last().unwrap().clone();
        extra.t += 1e-9;
        fan.samples.push(extra);
        // the old last sample now sits between a full and a clamped step
        assert_eq!(transport_residual(&fan, Psi::V).unwrap().samples, full);
    }

    #[test]
    fn short_history_needs_more_samples() {
        let fan = flat_fan(PointFields::default(), 16, 1);
        assert!(matches!(
            transport_residual(&fan, Psi::V),
            Err(Error::NeedsMoreSamples(_))
        ));
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let h = 0.1;
        let vals: Vec<f64> = (0..11).map(|k| (k as f64 * h).powi(3)).collect();
        assert!((integrate_uniform(&vals, h) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn central_derivative_nonuniform_exact_on_quadratics() {
        let t = [0.0, 0.3, 0.5];
        let f = t.map(|x| 2.0 * x * x - x + 1.0);
        assert!((central_derivative(t, f) - (4.0 * 0.3 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn energy_flux_nonnegative() {
        let fields = PointFields {
            v: 0.01,
            w: -0.02,
            v_t: 0.5,
            v_r: -0.4,
            w_r: 0.3,
        };
        let fan = flat_fan(fields, 16, 5);
        for psi in [Psi::V, Psi::W] {
            let e = energy_flux(&fan, 1.05, 0.05, psi).unwrap();
            assert!(e.e1 >= 0.0 && e.e2 >= 0.0 && e.f1 >= 0.0 && e.f2 >= 0.0);
        }
        assert!(energy_flux(&fan, 1.05, 0.0, Psi::V).is_err());
        assert!(energy_flux(&fan, 1.051, 0.05, Psi::V).is_err());
    }

    #[test]
    fn growth_fit_recovers_inverse_law() {
        let history: Vec<MuSample> = (0..40)
            .map(|k| {
                let mu = 0.9 - 0.02 * k as f64;
                MuSample {
                    t: 1.0 + 0.01 * k as f64,
                    mu_min: mu,
                    u_argmin: 0.05,
                    max_drv: 3.0 / mu,
                }
            })
            .collect();
        let g = d2_growth(&history, 0.05).unwrap();
        assert!((g.slope - 1.0).abs() < 1e-12);
        assert!(g.correlation > 0.999 && g.monotone);
        assert!(matches!(d2_growth(&history[..5], 0.05), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn frame_residual_small() {
        let rep = null_frame_residual(&[(1.0, 1.0), (0.2, 0.9), (3.0, 1.1)]).unwrap();
        assert!(rep.max_abs < 1e-14);
        assert_eq!(rep.samples, 3);
    }
}
