//! Liouville bubbles, the ε-regularized vortex ansatz and its Euler residual,
//! stereographic projection, the logarithmic potential of decaying fields and
//! the quadratic form ∫φ(U₀⁻¹φ − ψ) on fields orthogonal to the kernels.
//!
//! U₀(y) = 8/(1+|y|²)² and Γ₀ = log U₀ solve −ΔΓ₀ = e^{Γ₀} with ∫U₀ = 8π.
//! Planar fields on ℝ² are [`PolarField`]s on a log-spaced polar grid.

use crate::domain_green::{DomainModel, VortexConfiguration};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::polar::{ModeTable, PolarField, PolarGrid};
use crate::radial::{adaptive_simpson, gauss_legendre, simpson_uniform};
use faer::prelude::*;
use faer::Mat;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub fn u0(y: Vec2) -> f64 {
    let d = 1.0 + y.norm_sq();
    8.0 / (d * d)
}

pub fn gamma0(y: Vec2) -> f64 {
    8f64.ln() - 2.0 * y.norm_sq().ln_1p()
}

/// ∇U₀(y) = −32y/(1+|y|²)³.
pub fn grad_u0(y: Vec2) -> Vec2 {
    let d = 1.0 + y.norm_sq();
    y * (-32.0 / (d * d * d))
}

/// ∇Γ₀(y) = −4y/(1+|y|²).
pub fn grad_gamma0(y: Vec2) -> Vec2 {
    y * (-4.0 / (1.0 + y.norm_sq()))
}

/// ∫_{ℝ²} U₀ by adaptive Simpson in u = log ρ on [10⁻⁸, 10⁴], with the two
/// tails added in closed form.
pub fn total_mass(tol: f64) -> f64 {
    let (a, b) = (1e-8f64, 1e4f64);
    let f = |u: f64| {
        let r = u.exp();
        2.0 * PI * r * r * 8.0 / (1.0 + r * r).powi(2)
    };
    let inner = 8.0 * PI * a * a / (1.0 + a * a);
    let outer = 8.0 * PI / (1.0 + b * b);
    inner + adaptive_simpson(&f, a.ln(), b.ln(), tol) + outer
}

/// sup over interior nodes of |−Δ_h Γ₀ − U₀| on the lattice of spacing `h`
/// covering [−1, 1]².
pub fn liouville_residual(h: f64) -> f64 {
    let n = (2.0 / h).round() as usize;
    let node = |i: usize, j: usize| Vec2::new(-1.0 + i as f64 * h, -1.0 + j as f64 * h);
    let rows = crate::par::map_range(n - 1, |jj| {
        let j = jj + 1;
        let mut m = 0.0f64;
        for i in 1..n {
            let lap = (gamma0(node(i + 1, j))
                + gamma0(node(i - 1, j))
                + gamma0(node(i, j + 1))
                + gamma0(node(i, j - 1))
                - 4.0 * gamma0(node(i, j)))
                / (h * h);
            m = m.max((-lap - u0(node(i, j))).abs());
        }
        m
    });
    rows.into_iter().fold(0.0, f64::max)
}

/// ε together with the vortex centers ξ_j and strengths κ_j.
#[derive(Clone, Debug, PartialEq)]
pub struct BubbleParams {
    pub eps: f64,
    pub vortices: VortexConfiguration,
}

impl BubbleParams {
    pub fn new(eps: f64, vortices: VortexConfiguration, domain: &DomainModel) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidInput(format!("ε must be positive (got {eps})")));
        }
        vortices.validate(domain)?;
        Ok(BubbleParams { eps, vortices })
    }

    fn scaled(&self, x: Vec2, j: usize) -> Vec2 {
        (x - self.vortices.positions[j]) / self.eps
    }
}

/// (ω₀, Ψ₀)(x) with ω₀ = Σ κ_j 8ε²/(ε²+|x−ξ_j|²)² and
/// Ψ₀ = Σ κ_j [log 1/(ε²+|x−ξ_j|²)² − H(x, ξ_j)].
pub fn ansatz(params: &BubbleParams, domain: &DomainModel, x: Vec2) -> Result<(f64, f64)> {
    domain.check_interior(x)?;
    let e2 = params.eps * params.eps;
    let (mut w, mut psi) = (0.0, 0.0);
    for (xi, k) in params.vortices.positions.iter().zip(&params.vortices.strengths) {
        let d = e2 + (x - *xi).norm_sq();
        w += k * 8.0 * e2 / (d * d);
        psi += k * (-2.0 * d.ln() - domain.regular_part(x, *xi)?);
    }
    Ok((w, psi))
}

/// ∇_x of G_ε(x, ξ) = log 1/(ε²+|x−ξ|²)² − H(x, ξ).
fn grad_green_eps(domain: &DomainModel, eps: f64, x: Vec2, xi: Vec2) -> Result<Vec2> {
    let z = x - xi;
    Ok(z * (-4.0 / (eps * eps + z.norm_sq())) - domain.grad_regular_part(x, xi)?)
}

/// ∇Ψ₀(x).
pub fn grad_psi0(params: &BubbleParams, domain: &DomainModel, x: Vec2) -> Result<Vec2> {
    let mut g = Vec2::ZERO;
    for (xi, k) in params.vortices.positions.iter().zip(&params.vortices.strengths) {
        g += grad_green_eps(domain, params.eps, x, *xi)? * *k;
    }
    Ok(g)
}

/// E(ω₀, Ψ₀) = ∂_t ω₀ + ∇⊥Ψ₀·∇ω₀ for centers moving with velocities `xidot`:
///
/// ε⁻³ Σ_j κ_j [−ξ̇_j + ∇⊥_x(−κ_j H(x,ξ_j) + Σ_{i≠j} κ_i G_ε(x,ξ_i))]·∇U₀(y_j),
///
/// the self-interaction of the radial profile dropping out exactly.
pub fn ansatz_residual(
    params: &BubbleParams,
    domain: &DomainModel,
    xidot: &[Vec2],
    x: Vec2,
) -> Result<f64> {
    let cfg = &params.vortices;
    if xidot.len() != cfg.len() {
        return Err(Error::InvalidInput(format!(
            "{} velocities for {} vortices",
            xidot.len(),
            cfg.len()
        )));
    }
    domain.check_interior(x)?;
    let tiny = 1e-14 * domain.diameter();
    if cfg.positions.iter().any(|p| (x - *p).norm() <= tiny) {
        return Err(Error::Singularity("residual evaluated at a vortex center".into()));
    }
    let mut grads = Vec::with_capacity(cfg.len());
    for xi in &cfg.positions {
        grads.push(grad_green_eps(domain, params.eps, x, *xi)?);
    }
    let mut e = 0.0;
    for j in 0..cfg.len() {
        let kj = cfg.strengths[j];
        let self_h = domain.grad_regular_part(x, cfg.positions[j])? * (-kj);
        let mut flow = self_h;
        for i in (0..cfg.len()).filter(|&i| i != j) {
            flow += grads[i] * cfg.strengths[i];
        }
        let adv = flow.perp() - xidot[j];
        e += kj * adv.dot(grad_u0(params.scaled(x, j)));
    }
    Ok(e / params.eps.powi(3))
}

/// Brute-force ∂_t ω₀ + ∇⊥Ψ₀·∇ω₀: forward difference in t with step `dt`,
/// fourth-order central differences in x with step `dx`.
pub fn ansatz_residual_fd(
    params: &BubbleParams,
    domain: &DomainModel,
    xidot: &[Vec2],
    x: Vec2,
    dx: f64,
    dt: f64,
) -> Result<f64> {
    let moved = BubbleParams {
        eps: params.eps,
        vortices: VortexConfiguration {
            positions: params
                .vortices
                .positions
                .iter()
                .zip(xidot)
                .map(|(p, v)| *p + *v * dt)
                .collect(),
            strengths: params.vortices.strengths.clone(),
        },
    };
    let (w0, _) = ansatz(params, domain, x)?;
    let (w1, _) = ansatz(&moved, domain, x)?;
    let d4 = |dir: Vec2| -> Result<(f64, f64)> {
        let mut acc = (0.0, 0.0);
        for (s, c) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
            let (w, p) = ansatz(params, domain, x + dir * (s * dx))?;
            acc.0 += c * w;
            acc.1 += c * p;
        }
        Ok((acc.0 / (12.0 * dx), acc.1 / (12.0 * dx)))
    };
    let (wx, px) = d4(Vec2::new(1.0, 0.0))?;
    let (wy, py) = d4(Vec2::new(0.0, 1.0))?;
    // ∇⊥Ψ = (∂₂Ψ, −∂₁Ψ)
    Ok((w1 - w0) / dt + py * wx - px * wy)
}

/// ∫_Ω ω₀ by polar quadrature about each center: Gauss–Legendre in angle,
/// Simpson in log ρ up to the boundary along each ray.
pub fn ansatz_mass(params: &BubbleParams, domain: &DomainModel, n_theta: usize, n_rho: usize) -> Result<f64> {
    let shape = domain.shape();
    let e2 = params.eps * params.eps;
    let far = 2.0 * domain.diameter();
    let (gx, gw) = gauss_legendre(n_theta);
    let mut total = 0.0;
    for (xi, k) in params.vortices.positions.iter().zip(&params.vortices.strengths) {
        domain.check_interior(*xi)?;
        let mut per = 0.0;
        for (s, w) in gx.iter().zip(&gw) {
            let th = PI * (s + 1.0);
            let dir = Vec2::polar(1.0, th);
            let r_edge = far * shape.crossing(*xi, *xi + dir * far);
            let (u0, u1) = ((1e-6 * params.eps).ln(), r_edge.ln());
            let du = (u1 - u0) / (n_rho - 1) as f64;
            let h: Vec<f64> = (0..n_rho)
                .map(|i| {
                    let r = (u0 + i as f64 * du).exp();
                    let d = e2 + r * r;
                    8.0 * e2 / (d * d) * r * r
                })
                .collect();
            per += w * PI * simpson_uniform(&h, du);
        }
        total += k * per;
    }
    Ok(total)
}

/// ∫_{|y|<L} |∇Γ₀|² dy = 16π [log(1+L²) + 1/(1+L²) − 1].
pub fn energy_oracle(l: f64) -> f64 {
    let q = 1.0 + l * l;
    16.0 * PI * (q.ln() + 1.0 / q - 1.0)
}

/// ∫_{B_δ(c)} |∇Ψ₀|² dx by polar quadrature about `c`, log-graded from
/// 10⁻⁴ε so the core is resolved.
pub fn ansatz_energy(
    params: &BubbleParams,
    domain: &DomainModel,
    center: Vec2,
    delta: f64,
    n_rho: usize,
    n_theta: usize,
) -> Result<f64> {
    if domain.boundary_distance(center) <= delta {
        return Err(Error::Domain(format!("ball of radius {delta} leaves the domain")));
    }
    let (u0, u1) = ((1e-4 * params.eps).ln(), delta.ln());
    let du = (u1 - u0) / (n_rho - 1) as f64;
    let rows: Vec<Result<f64>> = crate::par::map_range(n_rho, |i| {
        let r = (u0 + i as f64 * du).exp();
        let mut s = 0.0;
        for j in 0..n_theta {
            let th = 2.0 * PI * (j as f64 + 0.5) / n_theta as f64;
            s += grad_psi0(params, domain, center + Vec2::polar(r, th))?.norm_sq();
        }
        Ok(s * 2.0 * PI / n_theta as f64 * r * r)
    });
    let h = rows.into_iter().collect::<Result<Vec<f64>>>()?;
    let core = {
        // the disk below 10⁻⁴ε, where |∇Ψ₀|² is essentially that of the centre
        let g = grad_psi0(params, domain, center)?.norm_sq();
        g * PI * (u0.exp()).powi(2)
    };
    Ok(simpson_uniform(&h, du) + core)
}

/// A point of the unit sphere S² ⊂ ℝ³.
pub type SpherePoint = [f64; 3];

/// lift(y) = (2y₁, 2y₂, |y|² − 1)/(1 + |y|²); the origin goes to the south pole.
pub fn stereo_lift(y: Vec2) -> SpherePoint {
    let q = y.norm_sq();
    let d = 1.0 + q;
    [2.0 * y.x / d, 2.0 * y.y / d, (q - 1.0) / d]
}

/// Inverse of [`stereo_lift`]: y = (z₁, z₂)/(1 − z₃).
pub fn stereo_project(z: SpherePoint) -> Result<Vec2> {
    let d = 1.0 - z[2];
    if !(d > 1e-14) {
        return Err(Error::Pole(format!("({}, {}, {}) is the north pole", z[0], z[1], z[2])));
    }
    Ok(Vec2::new(z[0] / d, z[1] / d))
}

/// ∫_{S²} f dσ with n Gauss–Legendre nodes in z₃ and 2n uniform azimuths.
pub fn sphere_integral<F: Fn(SpherePoint) -> f64 + Sync + Send>(f: F, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let na = 2 * n;
    let rows = crate::par::map_range(n, |i| {
        let s = (1.0 - x[i] * x[i]).max(0.0).sqrt();
        let mut acc = 0.0;
        for k in 0..na {
            let a = 2.0 * PI * (k as f64 + 0.5) / na as f64;
            acc += f([s * a.cos(), s * a.sin(), x[i]]);
        }
        w[i] * acc * 2.0 * PI / na as f64
    });
    rows.into_iter().sum()
}

/// Legendre polynomial P_ℓ(x).
pub fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return 1.0;
    }
    for k in 2..=l {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// φ(y) = U₀(y) P_ℓ(z₃(y)): the planar pull-back of a zonal spherical
/// harmonic of degree ℓ, so that U₀⁻¹φ is the harmonic itself.
pub fn zonal_harmonic_pullback(grid: Arc<PolarGrid>, l: usize) -> PolarField {
    PolarField::from_fn(grid, |y| u0(y) * legendre(l, stereo_lift(y)[2]))
}

/// Gaussian bump A·exp(−|y − c|²/w²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: Vec2,
    pub width: f64,
    pub amplitude: f64,
}

pub fn gaussian_bumps(grid: Arc<PolarGrid>, bumps: &[Bump]) -> PolarField {
    PolarField::from_fn(grid, |y| {
        bumps
            .iter()
            .map(|b| b.amplitude * (-(y - b.center).norm_sq() / (b.width * b.width)).exp())
            .sum()
    })
}

type Perturbation = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// Kernel directions Z₀..Z₃ and 𝒵₁₀..𝒵₁₃ with cutoff radius R:
///
/// Z₀ = 1, Z_l = y_l χ_{B_{5R}} (l = 1, 2), Z₃ = (1−|y|²)/(1+|y|²) + b₃;
/// 𝒵₁₀ = U₀, 𝒵₁l = ∂_l U₀, 𝒵₁₃ = 2U₀ + y·∇U₀.
#[derive(Clone)]
pub struct KernelSet {
    pub r: f64,
    pub nu: f64,
    b3: Option<Perturbation>,
}

impl fmt::Debug for KernelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSet")
            .field("r", &self.r)
            .field("nu", &self.nu)
            .field("perturbed", &self.b3.is_some())
            .finish()
    }
}

/// Default exponent in the bound |b₃| ≤ R^{−ν}.
pub const DEFAULT_NU: f64 = 0.5;

impl KernelSet {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!("cutoff radius must be positive (got {r})")));
        }
        Ok(KernelSet {
            r,
            nu: DEFAULT_NU,
            b3: None,
        })
    }

    /// Adds b₃ to Z₃. The bound |b₃| ≤ R^{−ν} is checked on a polar sample
    /// out to 8R.
    pub fn with_perturbation<F>(mut self, nu: f64, b3: F) -> Result<Self>
    where
        F: Fn(Vec2) -> f64 + Send + Sync + 'static,
    {
        if !(nu > 0.0) {
            return Err(Error::InvalidInput(format!("ν must be positive (got {nu})")));
        }
        let bound = self.r.powf(-nu) * (1.0 + 1e-12);
        let grid = PolarGrid::new(1e-3, 8.0 * self.r, 200, 32)?;
        for i in 0..grid.n_rho() {
            for j in 0..grid.n_theta {
                let v = b3(grid.point(i, j));
                if !(v.abs() <= bound) {
                    return Err(Error::Precondition(format!(
                        "|b₃| = {} exceeds R^(−ν) = {bound}",
                        v.abs()
                    )));
                }
            }
        }
        self.nu = nu;
        self.b3 = Some(Arc::new(b3));
        Ok(self)
    }

    /// The standard test perturbation b₃(y) = R^{−ν} y₁/(1+|y|).
    pub fn with_default_perturbation(self, nu: f64) -> Result<Self> {
        let a = self.r.powf(-nu);
        self.with_perturbation(nu, move |y| a * y.x / (1.0 + y.norm()))
    }

    pub fn z(&self, l: usize, y: Vec2) -> f64 {
        let inside = y.norm() < 5.0 * self.r;
        match l {
            0 => 1.0,
            1 if inside => y.x,
            2 if inside => y.y,
            1 | 2 => 0.0,
            3 => {
                let q = y.norm_sq();
                (1.0 - q) / (1.0 + q) + self.b3.as_ref().map_or(0.0, |b| b(y))
            }
            _ => panic!("kernel index {l} out of range"),
        }
    }

    pub fn zz(&self, l: usize, y: Vec2) -> f64 {
        match l {
            0 => u0(y),
            1 => grad_u0(y).x,
            2 => grad_u0(y).y,
            3 => 2.0 * u0(y) + grad_u0(y).dot(y),
            _ => panic!("kernel index {l} out of range"),
        }
    }

    /// Kernel fields and moment matrix on `grid`.
    pub fn basis(&self, grid: Arc<PolarGrid>) -> Result<KernelBasis> {
        let z: Vec<PolarField> = (0..4)
            .map(|l| PolarField::from_fn(grid.clone(), |y| self.z(l, y)))
            .collect();
        let zz: Vec<PolarField> = (0..4)
            .map(|l| PolarField::from_fn(grid.clone(), |y| self.zz(l, y)))
            .collect();
        let m = Mat::from_fn(4, 4, |a, b| z[a].inner(&zz[b]));
        let sv = m
            .singular_values()
            .map_err(|e| Error::Conditioning(format!("{e:?}")))?;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let cond = smax / smin;
        if !(cond <= MAX_CONDITION) {
            return Err(Error::Conditioning(format!(
                "moment matrix condition number {cond:e} at R = {}",
                self.r
            )));
        }
        Ok(KernelBasis { z, zz, matrix: m })
    }
}

/// Above this the moment residual after projection can no longer be driven
/// to 10⁻¹⁰ in double precision.
pub const MAX_CONDITION: f64 = 1e6;

/// Kernel fields Z_ℓ, 𝒵₁ℓ sampled on one grid, with M_{ℓl} = ∫ Z_ℓ 𝒵₁l.
#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub z: Vec<PolarField>,
    pub zz: Vec<PolarField>,
    matrix: Mat<f64>,
}

impl KernelBasis {
    pub fn moments(&self, phi: &PolarField) -> [f64; 4] {
        let mut m = [0.0; 4];
        for (l, v) in m.iter_mut().enumerate() {
            *v = phi.inner(&self.z[l]);
        }
        m
    }

    /// ∫|φ||Z_ℓ|: the scale against which moments are judged.
    fn moment_scales(&self, phi: &PolarField) -> [f64; 4] {
        let a = phi.zip_with(phi, |v, _| v.abs());
        let mut m = [0.0; 4];
        for (l, v) in m.iter_mut().enumerate() {
            *v = a.zip_with(&self.z[l], |p, z| p * z.abs()).integrate();
        }
        m
    }

    /// φ − Σ c_l 𝒵₁l with c chosen so that all four moments vanish.
    pub fn project(&self, phi: &PolarField) -> PolarField {
        let m = self.moments(phi);
        let rhs = Mat::from_fn(4, 1, |a, _| m[a]);
        let c = self.matrix.partial_piv_lu().solve(&rhs);
        let mut out = phi.clone();
        for l in 0..4 {
            out.axpy(-c[(l, 0)], &self.zz[l]);
        }
        out
    }

    /// Largest moment relative to its scale.
    pub fn orthogonality_defect(&self, phi: &PolarField) -> f64 {
        let m = self.moments(phi);
        let s = self.moment_scales(phi);
        m.iter()
            .zip(&s)
            .map(|(m, s)| if *s > 0.0 { m.abs() / s } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

/// Projects φ onto the complement of the kernel directions.
pub fn project_orthogonal(phi: &PolarField, kernels: &KernelSet) -> Result<PolarField> {
    Ok(kernels.basis(phi.grid.clone())?.project(phi))
}

/// ψ = (1/2π) ∫ log(1/|y−z|) φ(z) dz mode by mode on the log grid, without
/// any mass check. Mode m ≥ 1 uses
/// ψ_m(ρ) = (1/2m)[ρ^{−m}∫₀^ρ s^{m+1}φ_m ds + ρ^m ∫_ρ^∞ s^{1−m}φ_m ds],
/// mode 0 uses ψ₀(ρ) = −log ρ ∫₀^ρ sφ₀ ds − ∫_ρ^∞ s log s φ₀ ds.
pub fn log_potential(phi: &PolarField) -> PolarField {
    let grid = phi.grid.clone();
    let g = &grid.radial;
    let modes = phi.modes();
    let u: Vec<f64> = g.rho.iter().map(|r| r.ln()).collect();
    let coeffs = crate::par::map_range(modes.coeffs.len(), |m| {
        let c = &modes.coeffs[m];
        let h = |part: fn(&Complex64) -> f64| -> Vec<f64> {
            c.iter().zip(&g.rho).map(|(z, r)| part(z) * r * r).collect()
        };
        let (hr, hi) = (h(|z| z.re), h(|z| z.im));
        let solve = |h: &[f64]| -> Vec<f64> {
            if m == 0 {
                let f = g.cumulative_forward(h);
                let uh: Vec<f64> = h.iter().zip(&u).map(|(h, u)| h * u).collect();
                let b = g.cumulative_backward(&uh);
                (0..h.len()).map(|i| -u[i] * f[i] - b[i]).collect()
            } else {
                let a = m as f64;
                let f = g.exp_weighted_forward(h, a);
                let b = g.exp_weighted_backward(h, a);
                f.iter().zip(&b).map(|(f, b)| (f + b) / (2.0 * a)).collect()
            }
        };
        let (re, im) = (solve(&hr), solve(&hi));
        re.into_iter()
            .zip(im)
            .map(|(a, b)| Complex64::new(a, b))
            .collect::<Vec<_>>()
    });
    PolarField::from_modes(grid, &ModeTable { coeffs })
}

/// Relative mass above which [`newtonian`] refuses its input.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Logarithmic potential of a zero-mass decaying field.
pub fn newtonian(phi: &PolarField) -> Result<PolarField> {
    let mass = phi.integrate();
    let scale = phi.zip_with(phi, |v, _| v.abs()).integrate();
    if mass.abs() > MASS_TOLERANCE * scale {
        return Err(Error::Mass(format!("∫φ = {mass:e} against ∫|φ| = {scale:e}")));
    }
    Ok(log_potential(phi))
}

/// ∫φg with g = U₀⁻¹φ − ψ, the weighted norm ∫φ²U₀⁻¹ and their ratio
/// scaled by |log R|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gap {
    pub value: f64,
    pub weighted_norm: f64,
    pub ratio: f64,
}

/// Relative moment size above which a field does not count as orthogonal.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-6;

pub fn quadratic_form_gap(phi: &PolarField, kernels: &KernelSet) -> Result<Gap> {
    let basis = kernels.basis(phi.grid.clone())?;
    quadratic_form_gap_with(phi, kernels, &basis)
}

/// [`quadratic_form_gap`] with a prebuilt kernel basis.
pub fn quadratic_form_gap_with(phi: &PolarField, kernels: &KernelSet, basis: &KernelBasis) -> Result<Gap> {
    let defect = basis.orthogonality_defect(phi);
    if defect > ORTHOGONALITY_TOLERANCE {
        return Err(Error::Precondition(format!("orthogonality defect {defect:e}")));
    }
    let psi = newtonian(phi)?;
    let weighted = phi.map(|y, v| v * v / u0(y));
    let weighted_norm = weighted.integrate();
    let value = weighted_norm - phi.inner(&psi);
    let ratio = if weighted_norm > 0.0 {
        value * kernels.r.ln().abs() / weighted_norm
    } else {
        0.0
    };
    Ok(Gap {
        value,
        weighted_norm,
        ratio,
    })
}

/// Centers on a circle plus off-axis points: probes at |x − ξ_j| = δ·s for
/// the listed s, used for the near-field residual envelope.
pub fn near_probes(params: &BubbleParams, y_max: f64, n_rad: usize, n_ang: usize) -> Vec<(usize, Vec2)> {
    let mut out = Vec::new();
    for (j, xi) in params.vortices.positions.iter().enumerate() {
        for a in 0..n_rad {
            let s = y_max * (a as f64 + 1.0) / n_rad as f64;
            for b in 0..n_ang {
                let th = 2.0 * PI * (b as f64 + 0.25) / n_ang as f64;
                out.push((j, *xi + Vec2::polar(s * params.eps, th)));
            }
        }
    }
    out
}

/// Lattice probes with |x − ξ_j| > δ for all j and boundary clearance at
/// least `clearance`.
pub fn far_probes(
    domain: &DomainModel,
    centers: &[Vec2],
    delta: f64,
    clearance: f64,
    n: usize,
) -> Vec<Vec2> {
    let (lo, hi) = domain.shape().bounding_box();
    let mut out = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let p = Vec2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
            );
            if domain.boundary_distance(p) > clearance && centers.iter().all(|c| (p - *c).norm() > delta) {
                out.push(p);
            }
        }
    }
    out
}
