//! Closed-form leading-order predictions: critical exponent, `t*`, the
//! asymptotic `mu` and the predicted blow-up time.

use crate::error::Result;
use crate::fit::bisect;
use crate::profile::Profile;
use crate::pulse_data::{shock_margin, shock_quantity, PulseParams};

/// Bisection iterations for the blow-up time.
pub const BISECTION_ITERATIONS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalData {
    pub p_c: f64,
    pub kappa: f64,
    pub t_star: f64,
}

pub fn critical_data(params: &PulseParams) -> CriticalData {
    let kappa = params.kappa();
    CriticalData {
        p_c: params.p_c(),
        kappa,
        t_star: 1.0 + params.delta.powf(kappa),
    }
}

/// `G_p(t) = (1 - t^(1-p)) / (p - 1)`, and `ln t` for `p = 1`.
pub fn g_factor(t: f64, p: u32) -> f64 {
    if p == 1 {
        t.ln()
    } else {
        let q = p as f64 - 1.0;
        (1.0 - t.powf(-q)) / q
    }
}

/// `L mu` at `t = 1` to leading order: `-(p/2) delta^-kappa Q(s)`.
pub fn initial_mu_rate(params: &PulseParams, q: f64) -> f64 {
    -0.5 * params.p as f64 * params.delta.powf(-params.kappa()) * q
}

/// Leading-order `mu(t, s) = 1 - (p/2) delta^-kappa Q(s) G_p(t)`.
pub fn mu_asymptotic(t: f64, s: f64, params: &PulseParams, phi1: &Profile) -> f64 {
    let q = shock_quantity(phi1, params.p, s);
    1.0 - 0.5 * params.p as f64 * params.delta.powf(-params.kappa()) * q * g_factor(t, params.p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub p_c: f64,
    pub kappa: f64,
    pub t_star: f64,
    /// `None` when the shock assumption fails or `mu` does not reach zero
    /// within the search window.
    pub t_blow_pred: Option<f64>,
    pub s_pred: f64,
    pub u_pred: f64,
    pub q_max: f64,
    /// `L mu(1, u_pred)`
    pub mu_rate: f64,
}

impl Prediction {
    /// `true` when the predicted time does not exceed `t*`.
    pub fn before_t_star(&self) -> bool {
        self.t_blow_pred.is_some_and(|t| t <= self.t_star)
    }

    /// `mu(t, u_pred) ~ 1 + G_p(t) L mu(1, u_pred)`.
    pub fn mu_at(&self, t: f64, p: u32) -> f64 {
        1.0 + g_factor(t, p) * self.mu_rate
    }
}

/// Solve `G_p(t) = 2 delta^kappa / (p q)` on `[1, t* + 0.5]` by bisection.
pub fn blowup_time(params: &PulseParams, q: f64) -> Option<f64> {
    if !(q > 0.0) {
        return None;
    }
    let crit = critical_data(params);
    let target = 2.0 * params.delta.powf(crit.kappa) / (params.p as f64 * q);
    let hi = crit.t_star + 0.5;
    let f = |t: f64| g_factor(t, params.p) - target;
    if f(hi) < 0.0 {
        return None;
    }
    Some(bisect(f, 1.0, hi, BISECTION_ITERATIONS))
}

/// Predicted blow-up time and location for data `(phi0, phi1)`.
pub fn predict_blowup(params: &PulseParams, phi0: &Profile, phi1: &Profile) -> Result<Prediction> {
    let crit = critical_data(params);
    let margin = shock_margin(phi0, phi1, params)?;
    let t_blow_pred = if margin.satisfied {
        blowup_time(params, margin.q_max)
    } else {
        None
    };
    Ok(Prediction {
        p_c: crit.p_c,
        kappa: crit.kappa,
        t_star: crit.t_star,
        t_blow_pred,
        s_pred: margin.s_star,
        u_pred: -margin.s_star * params.delta,
        q_max: margin.q_max,
        mu_rate: initial_mu_rate(params, margin.q_max),
    })
}
