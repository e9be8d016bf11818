//! Pulse profiles on the pulse coordinate `s = (r - 1) / delta`.
//!
//! Every profile is supported in the open interval `(-1, 0)`; evaluation and
//! all derivatives return exactly zero outside it and at the endpoints.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Highest derivative order available from [`Profile::deriv`].
pub const MAX_DERIVATIVE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    StandardBump,
    Tabulated,
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProfileKind::StandardBump => "standard_bump",
            ProfileKind::Tabulated => "tabulated",
        })
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard_bump" => Ok(ProfileKind::StandardBump),
            "tabulated" => Ok(ProfileKind::Tabulated),
            other => Err(Error::InvalidParameter(format!("unknown profile kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Zero,
    Bump,
    /// Trigonometric interpolant of samples on `[-1, 0]`, stored as cosine and
    /// sine coefficients of the 1-periodic extension.
    Table { cos: Vec<f64>, sin: Vec<f64> },
    /// `phi_1` built from a base profile, see [`crate::pulse_data::build_phi1`].
    Phi1 {
        base: Arc<Profile>,
        delta: f64,
        p: u32,
        /// `delta^((1 - eps0) p) / (2 (p + 1))`
        nonlinear_coeff: f64,
    },
}

/// A smooth pulse shape on `s` in `(-1, 0)`.
#[derive(Debug, Clone)]
pub struct Profile {
    kind: ProfileKind,
    amplitude: f64,
    shape: Shape,
}

/// Build a profile of the given kind.
///
/// `standard_bump` is `A e^4 exp(1 / (s (s + 1)))`, normalised so that its peak
/// at `s = -1/2` equals `A`. A `tabulated` profile built this way samples the
/// same bump; use [`Profile::tabulated`] to supply samples directly.
pub fn make_profile(kind: ProfileKind, amplitude: f64) -> Result<Profile> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "profile amplitude must be positive, got {amplitude}"
        )));
    }
    match kind {
        ProfileKind::StandardBump => Ok(Profile {
            kind,
            amplitude,
            shape: Shape::Bump,
        }),
        ProfileKind::Tabulated => {
            let bump = make_profile(ProfileKind::StandardBump, amplitude)?;
            let n = 256;
            let samples: Vec<f64> = (0..n).map(|k| bump.eval(-1.0 + k as f64 / n as f64)).collect();
            Profile::tabulated(&samples, amplitude)
        }
    }
}

impl Profile {
    /// The identically zero profile.
    pub fn zero() -> Self {
        Profile {
            kind: ProfileKind::StandardBump,
            amplitude: 0.0,
            shape: Shape::Zero,
        }
    }

    /// Trigonometric interpolant through `samples[k] = f(-1 + k / n)`, `k = 0..n`.
    ///
    /// The samples must vanish at `s = -1` and should decay smoothly towards both
    /// ends so that the periodic extension is smooth.
    pub fn tabulated(samples: &[f64], amplitude: f64) -> Result<Self> {
        let n = samples.len();
        if n < 8 {
            return Err(Error::InvalidParameter(format!(
                "tabulated profile needs at least 8 samples, got {n}"
            )));
        }
        if samples[0].abs() > 1e-12 * samples.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0) {
            return Err(Error::InvalidParameter(
                "tabulated profile must vanish at s = -1".into(),
            ));
        }
        let kmax = n / 2;
        let mut cos = vec![0.0; kmax + 1];
        let mut sin = vec![0.0; kmax + 1];
        for k in 0..=kmax {
            let (mut a, mut b) = (0.0, 0.0);
            for (j, &f) in samples.iter().enumerate() {
                let arg = 2.0 * PI * (k * j) as f64 / n as f64;
                a += f * arg.cos();
                b += f * arg.sin();
            }
            let weight = if k == 0 || (n % 2 == 0 && k == kmax) { 1.0 } else { 2.0 };
            cos[k] = weight * a / n as f64;
            sin[k] = weight * b / n as f64;
        }
        Ok(Profile {
            kind: ProfileKind::Tabulated,
            amplitude,
            shape: Shape::Table { cos, sin },
        })
    }

    pub(crate) fn phi1(base: Profile, delta: f64, p: u32, eps0: f64) -> Self {
        let kind = base.kind;
        let amplitude = base.amplitude;
        let nonlinear_coeff = delta.powf((1.0 - eps0) * p as f64) / (2.0 * (p as f64 + 1.0));
        Profile {
            kind,
            amplitude,
            shape: Shape::Phi1 {
                base: Arc::new(base),
                delta,
                p,
                nonlinear_coeff,
            },
        }
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Zero)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.deriv(s, 0)
    }

    /// `k`-th derivative in `s`, `k <= MAX_DERIVATIVE` (order 0 is the value).
    pub fn deriv(&self, s: f64, k: u32) -> f64 {
        assert!(k <= MAX_DERIVATIVE, "derivative order {k} unsupported");
        if !(s > -1.0 && s < 0.0) {
            return 0.0;
        }
        match &self.shape {
            Shape::Zero => 0.0,
            Shape::Bump => self.amplitude * bump_derivatives(s)[k as usize],
            Shape::Table { cos, sin } => table_deriv(cos, sin, s, k),
            Shape::Phi1 {
                base,
                delta,
                p,
                nonlinear_coeff,
            } => {
                if k == MAX_DERIVATIVE {
                    panic!("phi_1 supports derivatives up to order {}", MAX_DERIVATIVE - 1);
                }
                let d: Vec<f64> = (0..=k + 1).map(|j| base.deriv(s, j)).collect();
                // a = -d/ds phi_0 and its derivatives
                let a: Vec<f64> = d[1..].iter().map(|x| -x).collect();
                let power = power_derivative(&a, *p + 1, k);
                a[k as usize] - delta * d[k as usize] - nonlinear_coeff * power
            }
        }
    }
}

/// Derivatives of order 0..=4 of the unit-peak bump `e^4 exp(1/(s(s+1)))`.
fn bump_derivatives(s: f64) -> [f64; 5] {
    let g = s * (s + 1.0);
    let f = 1.0 / g;
    let ex = (4.0 + f).exp();
    if ex == 0.0 {
        return [0.0; 5];
    }
    let g1 = 2.0 * s + 1.0;
    let (g2, g3, g4, g5) = (g * g, g * g * g, g * g * g * g, g * g * g * g * g);
    let f1 = -g1 / g2;
    let f2 = -2.0 / g2 + 2.0 * g1 * g1 / g3;
    let f3 = 12.0 * g1 / g3 - 6.0 * g1.powi(3) / g4;
    let f4 = 24.0 / g3 - 72.0 * g1 * g1 / g4 + 24.0 * g1.powi(4) / g5;
    [
        ex,
        ex * f1,
        ex * (f2 + f1 * f1),
        ex * (f3 + 3.0 * f1 * f2 + f1.powi(3)),
        ex * (f4 + 4.0 * f1 * f3 + 3.0 * f2 * f2 + 6.0 * f1 * f1 * f2 + f1.powi(4)),
    ]
}

fn table_deriv(cos: &[f64], sin: &[f64], s: f64, k: u32) -> f64 {
    let x = s + 1.0;
    let mut acc = 0.0;
    for (m, (&a, &b)) in cos.iter().zip(sin).enumerate() {
        let w = 2.0 * PI * m as f64;
        let arg = w * x;
        let (sn, cs) = arg.sin_cos();
        // d^k/dx^k of a cos(wx) + b sin(wx)
        let term = match k % 4 {
            0 => a * cs + b * sn,
            1 => -a * sn + b * cs,
            2 => -a * cs - b * sn,
            _ => a * sn - b * cs,
        };
        acc += term * w.powi(k as i32);
    }
    acc
}

/// `k`-th derivative of `a(s)^n` given `a` and its derivatives `a[0..=k]`.
fn power_derivative(a: &[f64], n: u32, k: u32) -> f64 {
    let nf = n as f64;
    let pw = |e: i32| if e < 0 { 0.0 } else { a[0].powi(e) };
    let n_i = n as i32;
    match k {
        0 => pw(n_i),
        1 => nf * pw(n_i - 1) * a[1],
        2 => nf * ((nf - 1.0) * pw(n_i - 2) * a[1] * a[1] + pw(n_i - 1) * a[2]),
        3 => {
            nf * ((nf - 1.0) * (nf - 2.0) * pw(n_i - 3) * a[1].powi(3)
                + 3.0 * (nf - 1.0) * pw(n_i - 2) * a[1] * a[2]
                + pw(n_i - 1) * a[3])
        }
        _ => unreachable!("power_derivative order {k}"),
    }
}

/// Peak location of the standard bump.
pub const BUMP_PEAK: f64 = -0.5;

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, s: f64, h: f64) -> f64 {
        (f(s + h) - f(s - h)) / (2.0 * h)
    }

    #[test]
    fn bump_normalised_at_peak() {
        let b = make_profile(ProfileKind::StandardBump, 1.0).unwrap();
        assert!((b.eval(-0.5) - 1.0).abs() < 1e-15);
        let b2 = make_profile(ProfileKind::StandardBump, 2.0).unwrap();
        assert!(b2.deriv(-0.5, 1).abs() < 1e-14);
        assert!((b2.eval(-0.5) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bump_vanishes_at_support_edge() {
        let b = make_profile(ProfileKind::StandardBump, 1.0).unwrap();
        assert!(b.eval(-0.999) < 1e-300);
        for s in [-1.0, 0.0, 0.3, -1.7] {
            for k in 0..=MAX_DERIVATIVE {
                assert_eq!(b.deriv(s, k), 0.0);
            }
        }
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let b = make_profile(ProfileKind::StandardBump, 1.3).unwrap();
        let h = 1e-5;
        for &s in &[-0.8, -0.61, -0.5, -0.37, -0.2] {
            for k in 1..=MAX_DERIVATIVE {
                let fd = central(|x| b.deriv(x, k - 1), s, h);
                let exact = b.deriv(s, k);
                assert!(
                    (fd - exact).abs() < 1e-6 * (1.0 + exact.abs()),
                    "s={s} k={k}: {fd} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn tabulated_reproduces_bump() {
        let b = make_profile(ProfileKind::StandardBump, 0.7).unwrap();
        let t = make_profile(ProfileKind::Tabulated, 0.7).unwrap();
        for &s in &[-0.9, -0.5, -0.31, -0.05] {
            assert!((t.eval(s) - b.eval(s)).abs() < 1e-8, "s={s}");
            assert!((t.deriv(s, 1) - b.deriv(s, 1)).abs() < 1e-6);
        }
        assert!(Profile::tabulated(&[1.0; 16], 1.0).is_err());
    }

    #[test]
    fn rejects_nonpositive_amplitude() {
        assert!(make_profile(ProfileKind::StandardBump, 0.0).is_err());
        assert!(make_profile(ProfileKind::StandardBump, -1.0).is_err());
        assert!("cusp".parse::<ProfileKind>().is_err());
        assert_eq!("tabulated".parse::<ProfileKind>().unwrap(), ProfileKind::Tabulated);
    }

    #[test]
    fn power_derivative_matches_finite_differences() {
        // a(s) = sin(s) + 2, check d^k (a^4)
        let a = |s: f64, k: u32| match k % 4 {
            0 => s.sin() + 2.0,
            1 => s.cos(),
            2 => -s.sin(),
            _ => -s.cos(),
        };
        let s = 0.4;
        for k in 1..=3 {
            let ders: Vec<f64> = (0..=k).map(|j| a(s, j)).collect();
            let fd = central(
                |x| {
                    let d: Vec<f64> = (0..k).map(|j| a(x, j)).collect();
                    power_derivative(&d, 4, k - 1)
                },
                s,
                1e-5,
            );
            assert!((power_derivative(&ders, 4, k) - fd).abs() < 1e-6);
        }
    }
}
