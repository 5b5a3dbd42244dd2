//! Radial quadrature: a log-spaced grid with sixth-order cumulative
//! integrals, plus adaptive Simpson for scalar integrals.
//!
//! On the grid, integrals in ρ are carried out in u = ln ρ, where power-law
//! profiles are smooth and the spacing is uniform.

use crate::error::{Error, Result};

/// ρ_i = exp(u_0 + i·du), i = 0..n.
#[derive(Clone, Debug, PartialEq)]
pub struct LogGrid {
    pub u0: f64,
    pub du: f64,
    pub rho: Vec<f64>,
}

impl LogGrid {
    pub fn new(rho_min: f64, rho_max: f64, n: usize) -> Result<Self> {
        if !(rho_min > 0.0 && rho_max > rho_min && n >= 8) {
            return Err(Error::InvalidInput(format!(
                "log grid needs 0 < rho_min < rho_max and n >= 8 (got {rho_min}, {rho_max}, {n})"
            )));
        }
        let u0 = rho_min.ln();
        let du = (rho_max.ln() - u0) / (n - 1) as f64;
        let mut rho: Vec<f64> = (0..n).map(|i| (u0 + i as f64 * du).exp()).collect();
        rho[n - 1] = rho_max;
        Ok(LogGrid { u0, du, rho })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn rho_min(&self) -> f64 {
        self.rho[0]
    }

    pub fn rho_max(&self) -> f64 {
        self.rho[self.rho.len() - 1]
    }

    /// ∫ h du over the whole grid (composite Simpson, 3/8 rule on the last
    /// panel when the interval count is odd).
    pub fn integrate_u(&self, h: &[f64]) -> f64 {
        simpson_uniform(h, self.du)
    }

    /// ∫ f(ρ) ρ dρ = ∫ ρ² f du over the grid range.
    pub fn integrate_rho(&self, f: &[f64]) -> f64 {
        let h: Vec<f64> = f.iter().zip(&self.rho).map(|(f, r)| f * r * r).collect();
        self.integrate_u(&h)
    }

    /// C_i = ∫_{u_0}^{u_i} h du.
    pub fn cumulative_forward(&self, h: &[f64]) -> Vec<f64> {
        cumulative(h, self.du)
    }

    /// D_i = ∫_{u_i}^{u_end} h du, accumulated from the far end so that small
    /// tails are not lost to cancellation.
    pub fn cumulative_backward(&self, h: &[f64]) -> Vec<f64> {
        let rev: Vec<f64> = h.iter().rev().copied().collect();
        let mut c = cumulative(&rev, self.du);
        c.reverse();
        c
    }

    /// A_i = ∫_{u_0}^{u_i} e^{−a(u_i − u)} h(u) du for a ≥ 0, via a stable
    /// recursion with exact exponential weights on each quintic panel.
    pub fn exp_weighted_forward(&self, h: &[f64], a: f64) -> Vec<f64> {
        exp_cumulative(h, self.du, a)
    }

    /// B_i = ∫_{u_i}^{u_end} e^{−a(u − u_i)} h(u) du.
    pub fn exp_weighted_backward(&self, h: &[f64], a: f64) -> Vec<f64> {
        let rev: Vec<f64> = h.iter().rev().copied().collect();
        let mut c = exp_cumulative(&rev, self.du, a);
        c.reverse();
        c
    }

    /// Linear interpolation of a nodal array at radius `r` (in u).
    pub fn interp(&self, vals: &[f64], r: f64) -> f64 {
        let s = (r.ln() - self.u0) / self.du;
        if s <= 0.0 {
            return vals[0];
        }
        let n = self.len();
        if s >= (n - 1) as f64 {
            return vals[n - 1];
        }
        let i = s.floor() as usize;
        let t = s - i as f64;
        vals[i] * (1.0 - t) + vals[i + 1] * t
    }
}

/// Points per interpolation stencil in the cumulative integrals (quintic
/// panels, sixth-order accurate).
const STENCIL: usize = 6;

/// Lagrange basis on stencil nodes `xs` evaluated at `s`.
fn lagrange(xs: &[f64; STENCIL], s: f64) -> [f64; STENCIL] {
    let mut out = [1.0; STENCIL];
    for k in 0..STENCIL {
        for m in 0..STENCIL {
            if m != k {
                out[k] *= (s - xs[m]) / (xs[k] - xs[m]);
            }
        }
    }
    out
}

#[allow(clippy::excessive_precision)]
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// ∫_0^1 w(s) L_k(s) ds for the interpolant through `xs`, by 8-point Gauss.
fn panel_weights<W: Fn(f64) -> f64>(xs: &[f64; STENCIL], w: &W) -> [f64; STENCIL] {
    let mut out = [0.0; STENCIL];
    for &(x, wt) in GL8.iter() {
        let s = 0.5 * (x + 1.0);
        let l = lagrange(xs, s);
        let ws = w(s) * 0.5 * wt;
        for k in 0..STENCIL {
            out[k] += ws * l[k];
        }
    }
    out
}

fn cumulative(h: &[f64], du: f64) -> Vec<f64> {
    exp_cumulative(h, du, 0.0)
}

fn exp_cumulative(h: &[f64], du: f64, a: f64) -> Vec<f64> {
    let n = h.len();
    let mut out = vec![0.0; n];
    let decay = (-a * du).exp();
    if n < STENCIL {
        // trapezoid fallback for tiny inputs
        for i in 1..n {
            out[i] = out[i - 1] * decay + 0.5 * du * (h[i - 1] * decay + h[i]);
        }
        return out;
    }
    let weight = |s: f64| (-a * du * (1.0 - s)).exp();
    // panel [i, i+1] uses nodes base..base+STENCIL with offset o = i − base
    let weights: Vec<[f64; STENCIL]> = (0..STENCIL - 1)
        .map(|o| {
            let mut xs = [0.0; STENCIL];
            for (m, x) in xs.iter_mut().enumerate() {
                *x = m as f64 - o as f64;
            }
            panel_weights(&xs, &weight)
        })
        .collect();
    let half = STENCIL / 2 - 1;
    for i in 0..n - 1 {
        let base = i.saturating_sub(half).min(n - STENCIL);
        let w = &weights[i - base];
        let panel: f64 = (0..STENCIL).map(|k| w[k] * h[base + k]).sum::<f64>() * du;
        out[i + 1] = out[i] * decay + panel;
    }
    out
}

/// Composite Simpson on uniform samples.
pub fn simpson_uniform(f: &[f64], dx: f64) -> f64 {
    let n = f.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * dx * (f[0] + f[1]),
        3 => dx / 3.0 * (f[0] + 4.0 * f[1] + f[2]),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail) = if intervals % 2 == 0 {
                (n - 1, 0.0)
            } else {
                let k = n - 4;
                (
                    k,
                    3.0 * dx / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]),
                )
            };
            let mut s = f[0] + f[simpson_end];
            for (i, v) in f.iter().enumerate().take(simpson_end).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            s * dx / 3.0 + tail
        }
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton on the three-term
/// recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Adaptive Simpson quadrature of `f` on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}
