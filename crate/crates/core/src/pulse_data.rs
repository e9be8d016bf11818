//! Short-pulse initial data: parameters, the outgoing-constraint choice of
//! `phi_1`, the shock-formation margin and constraint-order checks.

use crate::error::{Error, Result};
use crate::fit::{fit_log_log, golden_max};
use crate::grid::RadialGrid;
use crate::profile::Profile;
use crate::radial_solver::{FieldState, HYPERBOLICITY_FLOOR};

/// Tolerance used to decide `p == p_c`.
const CRITICAL_TOL: f64 = 1e-9;

/// Uniform samples on `(-1, 0)` used for maxima in `s`.
pub const S_GRID_SAMPLES: usize = 4096;

/// Default geometric pulse-width grid for exponent fits.
pub const DEFAULT_DELTA_GRID: [f64; 5] = [0.2, 0.141, 0.1, 0.0707, 0.05];

/// Scalar knobs of a short-pulse family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams {
    pub delta: f64,
    pub eps0: f64,
    pub p: u32,
    pub amplitude: f64,
}

impl PulseParams {
    pub fn new(delta: f64, eps0: f64, p: u32, amplitude: f64) -> Result<Self> {
        let params = Self {
            delta,
            eps0,
            p,
            amplitude,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 0.5], got {}",
                self.delta
            )));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps0 must lie in (0, 1), got {}",
                self.eps0
            )));
        }
        if self.p < 1 {
            return Err(Error::InvalidParameter("p must be at least 1".into()));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    /// Critical exponent `1 / (1 - eps0)`.
    pub fn p_c(&self) -> f64 {
        1.0 / (1.0 - self.eps0)
    }

    /// `kappa = 1 - (1 - eps0) p`; non-negative exactly when `p <= p_c`.
    pub fn kappa(&self) -> f64 {
        1.0 - (1.0 - self.eps0) * self.p as f64
    }

    /// `(1 - eps0) p`, the smallness order of `c - 1`.
    pub fn smallness_order(&self) -> f64 {
        (1.0 - self.eps0) * self.p as f64
    }

    pub fn is_critical(&self) -> bool {
        (self.p as f64 - self.p_c()).abs() < CRITICAL_TOL
    }

    pub fn is_supercritical(&self) -> bool {
        self.p as f64 > self.p_c() + CRITICAL_TOL
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..*self }
    }
}

/// `phi_1 = -phi_0' - delta phi_0 - (-phi_0')^(p+1) delta^((1-eps0)p) / (2(p+1))`.
pub fn build_phi1(phi0: &Profile, params: &PulseParams) -> Profile {
    Profile::phi1(phi0.clone(), params.delta, params.p, params.eps0)
}

/// Shock quantity `Q(s) = phi_1^(p-1) d/ds phi_1`.
pub fn shock_quantity(phi1: &Profile, p: u32, s: f64) -> f64 {
    let slope = phi1.deriv(s, 1);
    if p == 1 {
        slope
    } else {
        phi1.eval(s).powi(p as i32 - 1) * slope
    }
}

/// Threshold on `max Q` above which the data are shock-forming.
pub fn shock_threshold(params: &PulseParams) -> Result<f64> {
    let p = params.p as f64;
    if params.is_supercritical() {
        return Err(Error::Domain(format!(
            "shock assumption undefined for p = {} > p_c = {:.6}",
            params.p,
            params.p_c()
        )));
    }
    if params.is_critical() {
        let two_pm1 = 2f64.powi(params.p as i32 - 1);
        Ok((p - 1.0) * 2f64.powi(params.p as i32) / ((two_pm1 - 1.0) * p))
    } else {
        Ok(2.0 / p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockMargin {
    pub q_max: f64,
    pub s_star: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

/// Maximum of `Q` over `s`, without the threshold comparison.
pub fn max_shock_quantity(phi1: &Profile, p: u32, samples: usize) -> (f64, f64) {
    let q = |s: f64| shock_quantity(phi1, p, s);
    let h = 1.0 / samples as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for k in 1..samples {
        let val = q(-1.0 + k as f64 * h);
        if val > best.1 {
            best = (k, val);
        }
    }
    let centre = -1.0 + best.0 as f64 * h;
    let lo = (centre - h).max(-1.0);
    let hi = (centre + h).min(0.0);
    let (s_ref, q_ref) = golden_max(q, lo, hi, 60);
    if q_ref >= best.1 {
        (q_ref, s_ref)
    } else {
        (best.1, centre)
    }
}

/// Compare `max Q` against the shock-formation threshold.
pub fn shock_margin(_phi0: &Profile, phi1: &Profile, params: &PulseParams) -> Result<ShockMargin> {
    let threshold = shock_threshold(params)?;
    let (q_max, s_star) = max_shock_quantity(phi1, params.p, S_GRID_SAMPLES);
    let q_max = q_max.max(0.0);
    Ok(ShockMargin {
        q_max,
        s_star,
        threshold,
        satisfied: q_max > threshold,
    })
}

/// Initial fields at `t = 1`:
/// `phi = delta^(2-eps0) phi_0(s)`, `v = delta^(1-eps0) phi_1(s)`,
/// `w = delta^(1-eps0) phi_0'(s)` with `s = (r - 1)/delta`.
pub fn initial_fields(
    params: &PulseParams,
    phi0: &Profile,
    phi1: &Profile,
    grid: &RadialGrid,
) -> Result<FieldState> {
    let delta = params.delta;
    if !(grid.r_min < 1.0 - delta && grid.r_max > 1.0) {
        return Err(Error::InvalidGrid(format!(
            "grid [{}, {}] must contain the pulse shell ({}, 1)",
            grid.r_min,
            grid.r_max,
            1.0 - delta
        )));
    }
    let phi_scale = delta.powf(2.0 - params.eps0);
    let grad_scale = delta.powf(1.0 - params.eps0);
    let n = grid.n_points;
    let mut phi = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let s = (grid.r(i) - 1.0) / delta;
        if s > -1.0 && s < 0.0 {
            phi[i] = phi_scale * phi0.eval(s);
            v[i] = grad_scale * phi1.eval(s);
            w[i] = grad_scale * phi0.deriv(s, 1);
        }
    }
    Ok(FieldState::new(1.0, *grid, phi, v, w))
}

/// Result of [`constraint_exponent_fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintFit {
    pub k: u32,
    pub slope: f64,
    pub expected: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub deltas: Vec<f64>,
    pub sups: Vec<f64>,
}

/// Expected order `2 - eps0 - k max(0, kappa)` of `(d_t + d_r)^k phi(1, .)`.
pub fn expected_constraint_order(params: &PulseParams, k: u32) -> f64 {
    2.0 - params.eps0 - k as f64 * params.kappa().max(0.0)
}

/// `sup_r |(d_t + d_r)^k phi(1, r)|` for one pulse width, evaluated from the
/// closed-form profiles on a dense `s`-grid.
pub fn outgoing_derivative_sup(params: &PulseParams, phi0: &Profile, k: u32, samples: usize) -> Result<f64> {
    if !(k == 1 || k == 2) {
        return Err(Error::InvalidParameter(format!("k must be 1 or 2, got {k}")));
    }
    let phi1 = build_phi1(phi0, params);
    let delta = params.delta;
    let grad_scale = delta.powf(1.0 - params.eps0);
    let hess_scale = delta.powf(-params.eps0);
    let mut sup = 0.0f64;
    for j in 1..samples {
        let s = -1.0 + j as f64 / samples as f64;
        let v = grad_scale * phi1.eval(s);
        let w = grad_scale * phi0.deriv(s, 1);
        let value = if k == 1 {
            v + w
        } else {
            let r = 1.0 + s * delta;
            let h = 1.0 + v.powi(params.p as i32);
            if h <= HYPERBOLICITY_FLOOR {
                return Err(Error::HyperbolicityLoss { v, p: params.p });
            }
            let w_r = hess_scale * phi0.deriv(s, 2);
            let v_r = hess_scale * phi1.deriv(s, 1);
            // phi_tt from the equation, phi_tr = v_r, phi_rr = w_r
            (w_r + 2.0 * w / r) / h + 2.0 * v_r + w_r
        };
        sup = sup.max(value.abs());
    }
    Ok(sup)
}

/// Fit the order in `delta` of the outgoing constraint quantity.
pub fn constraint_exponent_fit(
    base: &PulseParams,
    deltas: &[f64],
    phi0: &Profile,
    k: u32,
) -> Result<ConstraintFit> {
    if deltas.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "constraint fit needs at least 4 pulse widths, got {}",
            deltas.len()
        )));
    }
    let sups = deltas
        .iter()
        .map(|&d| {
            let params = base.with_delta(d);
            params.validate()?;
            outgoing_derivative_sup(&params, phi0, k, 20_000)
        })
        .collect::<Result<Vec<_>>>()?;
    if sups.iter().all(|&s| s < 1e-14) {
        return Err(Error::DegenerateData(
            "all constraint sups vanish; cannot fit an order".into(),
        ));
    }
    let fit = fit_log_log(deltas, &sups)?;
    Ok(ConstraintFit {
        k,
        slope: fit.slope,
        expected: expected_constraint_order(base, k),
        residual: fit.residual,
        deltas: deltas.to_vec(),
        sups,
    })
}

/// Amplitude for which `max Q = target`, by bisection on `A`.
pub fn tune_amplitude(kind: crate::profile::ProfileKind, params: &PulseParams, target: f64) -> Result<f64> {
    if !(target > 0.0) {
        return Err(Error::InvalidParameter(format!("target q_max must be positive, got {target}")));
    }
    let q_of = |a: f64| -> Result<f64> {
        let phi0 = crate::profile::make_profile(kind, a)?;
        let phi1 = build_phi1(&phi0, &params.with_amplitude(a));
        Ok(max_shock_quantity(&phi1, params.p, 1024).0)
    };
    let mut hi = 1e-3;
    let mut iterations = 0;
    while q_of(hi)? < target {
        hi *= 2.0;
        iterations += 1;
        if iterations > 60 {
            return Err(Error::Domain(format!("cannot reach q_max = {target}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if q_of(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // polish on the full s-grid
    let mut a = 0.5 * (lo + hi);
    for _ in 0..3 {
        let phi0 = crate::profile::make_profile(kind, a)?;
        let phi1 = build_phi1(&phi0, &params.with_amplitude(a));
        let q = max_shock_quantity(&phi1, params.p, S_GRID_SAMPLES).0;
        let q_h = {
            let h = a * 1e-6;
            let phi0 = crate::profile::make_profile(kind, a + h)?;
            let phi1 = build_phi1(&phi0, &params.with_amplitude(a + h));
            (max_shock_quantity(&phi1, params.p, S_GRID_SAMPLES).0 - q) / h
        };
        if q_h <= 0.0 {
            break;
        }
        a -= (q - target) / q_h;
    }
    Ok(a)
}

impl PulseParams {
    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { amplitude, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_profile, ProfileKind};
    use proptest::prelude::*;

    fn bump(a: f64) -> Profile {
        make_profile(ProfileKind::StandardBump, a).unwrap()
    }

    /// Independent bump oracle: closed form and finite differences.
    fn bump_oracle(a: f64, s: f64) -> f64 {
        if s <= -1.0 || s >= 0.0 {
            0.0
        } else {
            a * (4.0 + 1.0 / (s * (s + 1.0))).exp()
        }
    }

    fn params(delta: f64, eps0: f64, p: u32) -> PulseParams {
        PulseParams::new(delta, eps0, p, 1.0).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(PulseParams::new(0.0, 0.5, 1, 1.0).is_err());
        assert!(PulseParams::new(0.6, 0.5, 1, 1.0).is_err());
        assert!(PulseParams::new(0.1, 1.0, 1, 1.0).is_err());
        assert!(PulseParams::new(0.1, 0.5, 1, -1.0).is_err());
        assert!(PulseParams::new(0.1, 0.5, 1, f64::NAN).is_err());
        assert!(PulseParams::new(0.1, 0.5, 1, 0.0).is_ok());
        assert!(PulseParams::new(0.1, 0.5, 0, 1.0).is_err());
        let p = params(0.1, 0.5, 2);
        assert!(p.is_critical() && p.kappa().abs() < 1e-15);
        assert!(params(0.1, 0.5, 3).kappa() < 0.0);
    }

    #[test]
    fn phi1_of_zero_is_zero() {
        let phi1 = build_phi1(&Profile::zero(), &params(0.1, 0.5, 1));
        for k in 0..50 {
            let s = -1.0 + k as f64 / 50.0;
            assert_eq!(phi1.eval(s), 0.0);
            assert_eq!(phi1.deriv(s, 1), 0.0);
        }
    }

    #[test]
    fn phi1_at_bump_peak() {
        // phi_0'(-1/2) = 0, so phi_1(-1/2) = -delta * phi_0(-1/2)
        let h = 1e-6;
        let oracle_slope = (bump_oracle(1.0, -0.5 + h) - bump_oracle(1.0, -0.5 - h)) / (2.0 * h);
        let expected = -oracle_slope - 0.1 * bump_oracle(1.0, -0.5)
            - 0.25 * (-oracle_slope).powi(2) * 0.1f64.powf(0.5);
        for p in 1..=3 {
            let phi1 = build_phi1(&bump(1.0), &params(0.1, 0.5, p));
            assert!((phi1.eval(-0.5) - (-0.1)).abs() < 1e-12);
            assert!((phi1.eval(-0.5) - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn phi1_small_delta_limit() {
        let phi0 = bump(0.8);
        let phi1 = build_phi1(&phi0, &params(1e-9, 0.5, 2));
        for &s in &[-0.7, -0.5, -0.2] {
            assert!((phi1.eval(s) + phi0.deriv(s, 1)).abs() < 1e-7);
        }
    }

    #[test]
    fn phi1_derivatives_consistent() {
        let phi1 = build_phi1(&bump(0.6), &params(0.1, 0.5, 3));
        let h = 1e-5;
        for &s in &[-0.8, -0.55, -0.3] {
            for k in 1..=3 {
                let fd = (phi1.deriv(s + h, k - 1) - phi1.deriv(s - h, k - 1)) / (2.0 * h);
                let exact = phi1.deriv(s, k);
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "k={k} s={s}");
            }
        }
    }

    #[test]
    fn thresholds() {
        assert_eq!(shock_threshold(&params(0.1, 0.5, 1)).unwrap(), 2.0);
        assert!((shock_threshold(&params(0.1, 0.5, 2)).unwrap() - 2.0).abs() < 1e-15);
        // p = 3 critical for eps0 = 2/3: (2 * 8) / (3 * 3)
        let crit3 = PulseParams::new(0.1, 2.0 / 3.0, 3, 1.0).unwrap();
        assert!((shock_threshold(&crit3).unwrap() - 16.0 / 9.0).abs() < 1e-12);
        assert!(matches!(
            shock_threshold(&params(0.1, 0.5, 3)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zero_data_margin() {
        let prm = params(0.1, 0.5, 1);
        let m = shock_margin(&Profile::zero(), &build_phi1(&Profile::zero(), &prm), &prm).unwrap();
        assert_eq!(m.q_max, 0.0);
        assert!(!m.satisfied);
    }

    #[test]
    fn initial_fields_values() {
        let prm = PulseParams::new(0.1, 0.5, 1, 1.0).unwrap();
        let phi0 = bump(1.0);
        let phi1 = build_phi1(&phi0, &prm);
        let grid = RadialGrid::new(0.5, 1.5, 2001).unwrap();
        let st = initial_fields(&prm, &phi0, &phi1, &grid).unwrap();
        let i_peak = 900; // r = 0.95
        assert!((grid.r(i_peak) - 0.95).abs() < 1e-12);
        let expected = 0.1f64.powf(1.5) * bump_oracle(1.0, -0.5);
        assert!((st.phi[i_peak] - expected).abs() < 1e-12);
        assert!((st.phi[i_peak] - 0.031_622_776_6).abs() < 1e-9);
        let i_out = 2000; // r = 1.5
        assert_eq!((st.phi[i_out], st.v[i_out], st.w[i_out]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn initial_gradient_matches_differences() {
        let prm = PulseParams::new(0.1, 0.5, 1, 1.0).unwrap();
        let phi0 = bump(1.0);
        let phi1 = build_phi1(&phi0, &prm);
        let err = |n: usize| {
            let grid = RadialGrid::new(0.5, 1.5, n).unwrap();
            let st = initial_fields(&prm, &phi0, &phi1, &grid).unwrap();
            let d = crate::grid::derivative_vec(&st.phi, grid.dr());
            d.iter().zip(&st.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let order = (err(2001) / err(4001)).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn initial_fields_rejects_short_grid() {
        let prm = params(0.1, 0.5, 1);
        let phi0 = bump(1.0);
        let phi1 = build_phi1(&phi0, &prm);
        let grid = RadialGrid::new(0.95, 1.5, 100).unwrap();
        assert!(matches!(
            initial_fields(&prm, &phi0, &phi1, &grid),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn expected_orders() {
        assert_eq!(expected_constraint_order(&params(0.1, 0.5, 1), 1), 1.0);
        assert_eq!(expected_constraint_order(&params(0.1, 0.5, 1), 2), 0.5);
        assert_eq!(expected_constraint_order(&params(0.1, 0.5, 3), 1), 1.5);
    }

    #[test]
    fn constraint_fit_errors() {
        let prm = params(0.1, 0.5, 1);
        assert!(constraint_exponent_fit(&prm, &[0.1, 0.05, 0.025], &bump(1.0), 1).is_err());
        assert!(matches!(
            constraint_exponent_fit(&prm, &[0.1, 0.07, 0.05, 0.035], &Profile::zero(), 1),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn tuned_amplitude_hits_target() {
        let prm = params(0.1, 0.5, 1);
        let a = tune_amplitude(ProfileKind::StandardBump, &prm, 4.0).unwrap();
        let phi0 = bump(a);
        let m = shock_margin(&phi0, &build_phi1(&phi0, &prm.with_amplitude(a)), &prm).unwrap();
        assert!((m.q_max - 4.0).abs() < 1e-8, "{}", m.q_max);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn phi1_support_inside_unit_interval(a in 0.05f64..1.0, delta in 0.01f64..0.5, p in 1u32..4) {
            let phi1 = build_phi1(&bump(a), &params(delta, 0.5, p));
            for s in [-1.0, 0.0, -1.2, 0.4] {
                prop_assert_eq!(phi1.eval(s), 0.0);
            }
        }

        #[test]
        fn margin_stable_under_regridding(a in 0.05f64..0.5, p in 1u32..3) {
            let prm = params(0.1, 0.5, p);
            let phi1 = build_phi1(&bump(a), &prm);
            let (coarse, _) = max_shock_quantity(&phi1, p, S_GRID_SAMPLES);
            let (fine, _) = max_shock_quantity(&phi1, p, 2 * S_GRID_SAMPLES);
            prop_assert!((coarse - fine).abs() < 1e-6);
        }
    }
}
