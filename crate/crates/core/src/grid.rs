//! Uniform radial grid, centered finite-difference stencils and cubic interpolation.

use crate::error::{Error, Result};

/// Uniform grid on `[r_min, r_max]` with `n_points` nodes (both ends included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub n_points: usize,
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, n_points: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_max > r_min && r_min.is_finite() && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < r_min < r_max, got [{r_min}, {r_max}]"
            )));
        }
        if n_points < 5 {
            return Err(Error::InvalidGrid(format!(
                "need at least 5 nodes, got {n_points}"
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            n_points,
        })
    }

    /// Grid whose spacing is at most `dr_target`.
    pub fn with_spacing(r_min: f64, r_max: f64, dr_target: f64) -> Result<Self> {
        if !(dr_target > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {dr_target}")));
        }
        let intervals = ((r_max - r_min) / dr_target).round().max(4.0) as usize;
        Self::new(r_min, r_max, intervals + 1)
    }

    /// Same interval, `factor` times as many cells.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_points: (self.n_points - 1) * factor + 1,
            ..*self
        }
    }

    #[inline]
    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        self.r_min + i as f64 * self.dr()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.r(i)).collect()
    }
}

/// First derivative: fourth-order centered in the interior, second-order
/// centered next to the ends and one-sided second-order at the ends.
pub fn derivative(f: &[f64], dr: f64, out: &mut [f64]) {
    let n = f.len();
    debug_assert!(n >= 5 && out.len() == n);
    stencil(|i| f[i], n, dr, out);
}

pub fn derivative_vec(f: &[f64], dr: f64) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    derivative(f, dr, &mut out);
    out
}

fn stencil(f: impl Fn(usize) -> f64, n: usize, dr: f64, out: &mut [f64]) {
    let inv2 = 0.5 / dr;
    let inv12 = 1.0 / (12.0 * dr);
    out[0] = (-3.0 * f(0) + 4.0 * f(1) - f(2)) * inv2;
    out[1] = (f(2) - f(0)) * inv2;
    for i in 2..n - 2 {
        out[i] = (8.0 * (f(i + 1) - f(i - 1)) - (f(i + 2) - f(i - 2))) * inv12;
    }
    out[n - 2] = (f(n - 1) - f(n - 3)) * inv2;
    out[n - 1] = (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) * inv2;
}

/// Radial divergence `r^-2 d(r^2 f)/dr` with the same stencil applied to `r^2 f`.
///
/// The flux form keeps the weighted energy `sum r^2 (v^2 + w^2)` exactly
/// conserved by the linear semi-discrete system away from the boundaries.
pub fn radial_divergence(grid: &RadialGrid, f: &[f64], out: &mut [f64]) {
    let n = f.len();
    stencil(
        |i| {
            let r = grid.r(i);
            r * r * f[i]
        },
        n,
        grid.dr(),
        out,
    );
    for (i, o) in out.iter_mut().enumerate() {
        let r = grid.r(i);
        *o /= r * r;
    }
}

/// Piecewise-cubic Hermite interpolation of nodal data `f` at `r`, with
/// central-secant node slopes (one-sided at the ends).
///
/// No slope limiter: a limiter would switch on and off along a
/// characteristic and spoil the cancellation in `v_t + c v_r`. Points outside
/// the grid are clamped to the end values.
pub fn interp_cubic(grid: &RadialGrid, f: &[f64], r: f64) -> f64 {
    let n = f.len();
    let dr = grid.dr();
    let x = (r - grid.r_min) / dr;
    if x <= 0.0 {
        return f[0];
    }
    if x >= (n - 1) as f64 {
        return f[n - 1];
    }
    let i = (x.floor() as usize).min(n - 2);
    let theta = x - i as f64;
    let secant = |k: usize| f[k + 1] - f[k];
    let d_mid = secant(i);
    let d_left = if i > 0 { secant(i - 1) } else { d_mid };
    let d_right = if i + 2 < n { secant(i + 1) } else { d_mid };
    let m0 = 0.5 * (d_left + d_mid);
    let m1 = 0.5 * (d_mid + d_right);
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * f[i] + h10 * m0 + h01 * f[i + 1] + h11 * m1
}
