//! Transport equations solved along characteristics.
//!
//! Inner problem (scaled time τ = t/ε²):
//!   φ_τ + ∇⊥(Γ₀ + 𝓡)·∇φ = E(y, ε²τ) on ℝ², φ(·, 0) = 0,
//! outer problem on Ω:
//!   φ_t + ∇⊥(Ψ₀ + 𝓠)·∇φ = E(x, t), φ(·, 0) = 0.
//! Both are represented by Duhamel integrals of E along backward
//! characteristics, integrated with RK4 and summed with the trapezoid rule.

use crate::domain_green::DomainModel;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::lattice::{Lattice, ScalarField2D};
use crate::nvortex::Trajectory;
use std::io::Write;
use std::sync::Arc;

/// The perturbation 𝓡(y, t) of the inner advection field.
pub trait Perturbation: Send + Sync {
    fn value(&self, y: Vec2, t: f64) -> f64;
    fn grad(&self, y: Vec2, t: f64) -> Vec2;
}

/// Quintic smoothstep cutoff: 1 on [0, 1/2], 0 on [1, ∞).
fn cutoff(s: f64) -> (f64, f64) {
    if s <= 0.5 {
        return (1.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let u = 2.0 * (s - 0.5);
    let p = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let dp = 30.0 * u * u * (1.0 - u) * (1.0 - u);
    (1.0 - p, -2.0 * dp)
}

/// sup_s s·|χ′(s)| for the cutoff above.
const CUTOFF_SLOPE: f64 = 3.75;

/// 𝓡(y, t) = Mε² Σ_i a_i cos(ω_i t + φ_i) (b_i·y) χ(|y|/4R).
///
/// The amplitudes are normalized so that |∇𝓡| ≤ Mε²(1+|y|), 𝓡 vanishes for
/// |y| ≥ 4R and |D²𝓡| = O(ε²/R).
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothPerturbation {
    pub scale: f64,
    pub support: f64,
    pub terms: Vec<PerturbationTerm>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationTerm {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub direction: Vec2,
}

impl SmoothPerturbation {
    pub fn new(eps: f64, r: f64, m: f64, terms: Vec<PerturbationTerm>) -> Result<Self> {
        if !(eps > 0.0 && r > 0.0 && m >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "perturbation needs ε, R > 0 and M ≥ 0 (got {eps}, {r}, {m})"
            )));
        }
        let weight: f64 = terms.iter().map(|t| t.amplitude.abs() * t.direction.norm()).sum();
        let mut terms = terms;
        if weight > 0.0 {
            let k = 1.0 / (weight * (1.0 + CUTOFF_SLOPE));
            for t in &mut terms {
                t.amplitude *= k;
            }
        }
        Ok(SmoothPerturbation {
            scale: m * eps * eps,
            support: 4.0 * r,
            terms,
        })
    }

    /// `n` terms with amplitudes, frequencies, phases and directions drawn
    /// from `rng`.
    pub fn random<R: rand::Rng>(eps: f64, r: f64, m: f64, n: usize, rng: &mut R) -> Result<Self> {
        let terms = (0..n)
            .map(|_| PerturbationTerm {
                amplitude: rng.random_range(-1.0..1.0),
                omega: rng.random_range(0.0..6.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                direction: Vec2::polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)),
            })
            .collect();
        SmoothPerturbation::new(eps, r, m, terms)
    }
}

impl Perturbation for SmoothPerturbation {
    fn value(&self, y: Vec2, t: f64) -> f64 {
        let (chi, _) = cutoff(y.norm() / self.support);
        if chi == 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .terms
            .iter()
            .map(|p| p.amplitude * (p.omega * t + p.phase).cos() * p.direction.dot(y))
            .sum();
        self.scale * s * chi
    }

    fn grad(&self, y: Vec2, t: f64) -> Vec2 {
        let r = y.norm();
        let (chi, dchi) = cutoff(r / self.support);
        if chi == 0.0 && dchi == 0.0 {
            return Vec2::ZERO;
        }
        let mut g = Vec2::ZERO;
        for p in &self.terms {
            let c = p.amplitude * (p.omega * t + p.phase).cos();
            g += p.direction * (c * chi);
            if r > 0.0 && dchi != 0.0 {
                g += y * (c * p.direction.dot(y) * dchi / (self.support * r));
            }
        }
        g * self.scale
    }
}

/// Advection field ∇⊥(Γ₀ + 𝓡) of the inner problem.
#[derive(Clone)]
pub struct InnerAdvection {
    pub eps: f64,
    /// Horizon T in the original time; scaled times run over [0, T/ε²].
    pub horizon: f64,
    /// 𝓡 vanishes for |y| ≥ 4R.
    pub r: f64,
    /// Bound |∇𝓡| ≤ Mε²(1+|y|).
    pub m: f64,
    perturbation: Option<Arc<dyn Perturbation>>,
}

impl std::fmt::Debug for InnerAdvection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InnerAdvection")
            .field("eps", &self.eps)
            .field("horizon", &self.horizon)
            .field("r", &self.r)
            .field("m", &self.m)
            .field("perturbed", &self.perturbation.is_some())
            .finish()
    }
}

impl InnerAdvection {
    /// 𝓡 = 0.
    pub fn unperturbed(eps: f64, horizon: f64) -> Result<Self> {
        check_positive(eps, horizon)?;
        Ok(InnerAdvection {
            eps,
            horizon,
            r: f64::INFINITY,
            m: 0.0,
            perturbation: None,
        })
    }

    /// Checks the support and gradient bounds of 𝓡 on a sample of points and
    /// times before accepting it.
    pub fn new(eps: f64, horizon: f64, r: f64, m: f64, perturbation: Arc<dyn Perturbation>) -> Result<Self> {
        check_positive(eps, horizon)?;
        if !(r > 0.0 && m >= 0.0) {
            return Err(Error::InvalidInput(format!("need R > 0 and M ≥ 0 (got {r}, {m})")));
        }
        let bound = m * eps * eps;
        for it in 0..=8 {
            let t = horizon * it as f64 / 8.0;
            for ir in 0..=60 {
                let rho = 5.0 * r * ir as f64 / 60.0;
                for ia in 0..12 {
                    let y = Vec2::polar(rho, std::f64::consts::TAU * ia as f64 / 12.0);
                    let g = perturbation.grad(y, t).norm();
                    if g > bound * (1.0 + rho) * (1.0 + 1e-9) + 1e-300 {
                        return Err(Error::Precondition(format!(
                            "|∇𝓡| = {g:e} exceeds Mε²(1+|y|) at |y| = {rho}, t = {t}"
                        )));
                    }
                    if rho > 4.0 * r * (1.0 + 1e-12) && (perturbation.value(y, t) != 0.0 || g != 0.0) {
                        return Err(Error::Precondition(format!(
                            "𝓡 does not vanish at |y| = {rho} ≥ 4R"
                        )));
                    }
                }
            }
        }
        Ok(InnerAdvection {
            eps,
            horizon,
            r,
            m,
            perturbation: Some(perturbation),
        })
    }

    /// Last scaled time T/ε².
    pub fn tau_max(&self) -> f64 {
        self.horizon / (self.eps * self.eps)
    }

    fn grad_r(&self, y: Vec2, s: f64) -> Vec2 {
        match &self.perturbation {
            Some(p) => p.grad(y, self.eps * self.eps * s),
            None => Vec2::ZERO,
        }
    }

    /// dȳ/ds at scaled time s.
    pub fn velocity(&self, y: Vec2, s: f64) -> Vec2 {
        let q = 1.0 + y.norm_sq();
        Vec2::new(-y.y, y.x) * (4.0 / q) + self.grad_r(y, s).perp()
    }

    /// Gronwall constants (a, b) with a(1+|y|²) ≤ 1+|ȳ(s)|² ≤ b(1+|y|²) over
    /// the whole horizon: |d log(1+|ȳ|²)/ds| ≤ (1+√2)Mε².
    pub fn gronwall_bounds(&self) -> (f64, f64) {
        let c = (1.0 + std::f64::consts::SQRT_2) * self.m * self.horizon;
        ((-c).exp(), c.exp())
    }
}

fn check_positive(eps: f64, horizon: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite() && horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need ε > 0 and T > 0 (got {eps}, {horizon})"
        )));
    }
    Ok(())
}

/// How steps along a characteristic are chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// Inner: Δs = scale·min(0.05(1+|y|²), 1). Outer: Δt = scale·min(max, angle/rate).
    Adaptive(f64),
    /// Constant step (used for finite differences, where the step sequence
    /// must not depend on the starting point).
    Fixed(f64),
}

/// Polar stepping (exact for the Γ₀ rotation) is used unless the
/// perturbation moves the point by more than this fraction of its radius in
/// one step; near the origin the step is Cartesian.
const POLAR_SWITCH: f64 = 0.05;

fn inner_step(adv: &InnerAdvection, y: Vec2, s: f64, h: f64) -> Vec2 {
    let rho = y.norm();
    if rho == 0.0 || adv.grad_r(y, s).norm() * h.abs() > POLAR_SWITCH * rho {
        let k1 = adv.velocity(y, s);
        let k2 = adv.velocity(y + k1 * (0.5 * h), s + 0.5 * h);
        let k3 = adv.velocity(y + k2 * (0.5 * h), s + 0.5 * h);
        let k4 = adv.velocity(y + k3 * h, s + h);
        return y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    let f = |s: f64, rho: f64, th: f64| {
        let (sn, cs) = th.sin_cos();
        let w = adv.grad_r(Vec2::new(rho * cs, rho * sn), s).perp();
        let dr = w.x * cs + w.y * sn;
        let dth = 4.0 / (1.0 + rho * rho) + (-w.x * sn + w.y * cs) / rho;
        (dr, dth)
    };
    let th = y.angle();
    let k1 = f(s, rho, th);
    let k2 = f(s + 0.5 * h, rho + 0.5 * h * k1.0, th + 0.5 * h * k1.1);
    let k3 = f(s + 0.5 * h, rho + 0.5 * h * k2.0, th + 0.5 * h * k2.1);
    let k4 = f(s + h, rho + h * k3.0, th + h * k3.1);
    let r1 = rho + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
    let t1 = th + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    Vec2::polar(r1, t1)
}

fn inner_dt(y: Vec2, rule: StepRule) -> f64 {
    match rule {
        StepRule::Adaptive(scale) => scale * (0.05 * (1.0 + y.norm_sq())).min(1.0),
        StepRule::Fixed(h) => h,
    }
}

/// Walks the characteristic from (s0, y) to s1, calling `visit(s, ȳ)` at
/// every node including both ends.
fn inner_walk<F: FnMut(f64, Vec2)>(adv: &InnerAdvection, y: Vec2, s0: f64, s1: f64, rule: StepRule, mut visit: F) -> Vec2 {
    let dir = if s1 >= s0 { 1.0 } else { -1.0 };
    let (mut s, mut p) = (s0, y);
    visit(s, p);
    while (s1 - s) * dir > 0.0 {
        let h = inner_dt(p, rule).min((s1 - s) * dir);
        p = inner_step(adv, p, s, h * dir);
        s = if ((s1 - s) * dir - h).abs() <= 1e-14 * s1.abs().max(1.0) { s1 } else { s + h * dir };
        visit(s, p);
    }
    p
}

fn check_scaled_time(adv: &InnerAdvection, s: f64) -> Result<()> {
    let top = adv.tau_max() * (1.0 + 1e-12);
    if !(s >= 0.0 && s <= top) {
        return Err(Error::InvalidInput(format!(
            "scaled time {s} outside [0, T/ε² = {}]",
            adv.tau_max()
        )));
    }
    Ok(())
}

/// ȳ(s; τ, y): the inner characteristic through y at scaled time τ,
/// evaluated at scaled time s.
pub fn inner_characteristic(adv: &InnerAdvection, tau: f64, y: Vec2, s: f64) -> Result<Vec2> {
    check_scaled_time(adv, tau)?;
    check_scaled_time(adv, s)?;
    if !y.is_finite() {
        return Err(Error::InvalidInput("non-finite point".into()));
    }
    Ok(inner_walk(adv, y, tau, s, StepRule::Adaptive(1.0), |_, _| {}))
}

/// ∫_0^τ E(ȳ(s; τ, y), ε²s) ds by the trapezoid rule on the RK4 nodes.
fn inner_duhamel<E>(adv: &InnerAdvection, e: &E, y: Vec2, tau: f64, rule: StepRule) -> f64
where
    E: Fn(Vec2, f64) -> f64 + ?Sized,
{
    let e2 = adv.eps * adv.eps;
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    inner_walk(adv, y, tau, 0.0, rule, |s, p| {
        let v = e(p, e2 * s);
        if let Some((s0, v0)) = prev {
            acc += 0.5 * (v0 + v) * (s0 - s);
        }
        prev = Some((s, v));
    });
    acc
}

/// φ sampled at points at one time, with a Richardson error estimate from
/// halving the step.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution {
    pub t: f64,
    pub points: Vec<Vec2>,
    pub values: Vec<f64>,
    pub error: Vec<f64>,
}

/// φ(y, t) = ∫_0^{t/ε²} E(ȳ(s; t/ε², y), ε²s) ds at each point (t in the
/// original time).
pub fn solve_inner<E>(adv: &InnerAdvection, e: &E, points: &[Vec2], t: f64) -> Result<InnerSolution>
where
    E: Fn(Vec2, f64) -> f64 + Sync,
{
    let tau = t / (adv.eps * adv.eps);
    check_scaled_time(adv, tau)?;
    let out = crate::par::map_slice(points, |&y| {
        let coarse = inner_duhamel(adv, e, y, tau, StepRule::Adaptive(1.0));
        let fine = inner_duhamel(adv, e, y, tau, StepRule::Adaptive(0.5));
        (fine, (fine - coarse).abs() / 3.0)
    });
    Ok(InnerSolution {
        t,
        points: points.to_vec(),
        values: out.iter().map(|v| v.0).collect(),
        error: out.iter().map(|v| v.1).collect(),
    })
}

/// φ at a single point with a given step rule (no error estimate).
pub fn inner_value<E>(adv: &InnerAdvection, e: &E, y: Vec2, t: f64, rule: StepRule) -> Result<f64>
where
    E: Fn(Vec2, f64) -> f64,
{
    let tau = t / (adv.eps * adv.eps);
    check_scaled_time(adv, tau)?;
    Ok(inner_duhamel(adv, e, y, tau, rule))
}

/// Weighted amplification sup|(1+|y|)^{−α}φ| / sup|(1+|y|)^{−α}E| over the
/// sample points and times.
pub fn inner_gain<E>(adv: &InnerAdvection, e: &E, points: &[Vec2], times: &[f64], alpha: f64) -> Result<f64>
where
    E: Fn(Vec2, f64) -> f64 + Sync,
{
    let w = |y: Vec2| (1.0 + y.norm()).powf(-alpha);
    let (mut top, mut bottom) = (0.0f64, 0.0f64);
    for &t in times {
        let sol = solve_inner(adv, e, points, t)?;
        for (y, v) in points.iter().zip(&sol.values) {
            top = top.max(w(*y) * v.abs());
        }
    }
    for &t in times {
        for y in points {
            bottom = bottom.max(w(*y) * e(*y, t).abs());
        }
    }
    if bottom == 0.0 {
        return Ok(0.0);
    }
    Ok(top / bottom)
}

/// Result of a gradient-envelope probe.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport {
    pub eps: f64,
    /// max [(1+|y|)|∇φ| + |φ|] / [ε⁻² A (1+|y|)^α] over the probe points.
    pub constant: f64,
    pub worst: Vec2,
    pub samples: usize,
}

/// Checks (1+|y|)|∇E| + |E| + |E_t| ≤ A(1+|y|)^α on the probe points and a
/// few times, by central differences.
fn check_source_envelope<E>(e: &E, points: &[Vec2], times: &[f64], a: f64, alpha: f64) -> Result<()>
where
    E: Fn(Vec2, f64) -> f64,
{
    let h = 1e-6;
    for &t in times {
        for &y in points {
            let gx = (e(y + Vec2::new(h, 0.0), t) - e(y - Vec2::new(h, 0.0), t)) / (2.0 * h);
            let gy = (e(y + Vec2::new(0.0, h), t) - e(y - Vec2::new(0.0, h), t)) / (2.0 * h);
            let et = (e(y, t + h) - e(y, (t - h).max(0.0))) / (t + h - (t - h).max(0.0));
            let lhs = (1.0 + y.norm()) * gx.hypot(gy) + e(y, t).abs() + et.abs();
            let rhs = a * (1.0 + y.norm()).powf(alpha);
            if lhs > rhs * (1.0 + 1e-4) + 1e-12 {
                return Err(Error::Precondition(format!(
                    "source envelope violated at y = ({}, {}), t = {t}: {lhs:e} > {rhs:e}",
                    y.x, y.y
                )));
            }
        }
    }
    Ok(())
}

/// Finite-difference gradient of φ(·, t) on a polar sample of |y| < δ/ε and
/// the fitted constant of the envelope (1+|y|)|∇φ| + |φ| ≤ Cε⁻²A(1+|y|)^α.
#[allow(clippy::too_many_arguments)]
pub fn inner_gradient_probe<E>(
    adv: &InnerAdvection,
    e: &E,
    a: f64,
    alpha: f64,
    delta: f64,
    t: f64,
    n_rad: usize,
    n_ang: usize,
) -> Result<EnvelopeReport>
where
    E: Fn(Vec2, f64) -> f64 + Sync,
{
    if !(a > 0.0 && delta > 0.0) || n_rad == 0 || n_ang == 0 {
        return Err(Error::InvalidInput("probe needs A, δ > 0 and a nonempty sample".into()));
    }
    let y_max = delta / adv.eps;
    let mut points = vec![Vec2::ZERO];
    for i in 1..=n_rad {
        let r = y_max * i as f64 / (n_rad as f64 + 1.0);
        for j in 0..n_ang {
            points.push(Vec2::polar(r, std::f64::consts::TAU * (j as f64 + 0.5) / n_ang as f64));
        }
    }
    let times = [0.0, 0.5 * t, t];
    check_source_envelope(e, &points, &times, a, alpha)?;
    let tau = t / (adv.eps * adv.eps);
    check_scaled_time(adv, tau)?;
    let scale = a / (adv.eps * adv.eps);
    let vals = crate::par::map_slice(&points, |&y| {
        // same step sequence at the five stencil points
        let rule = StepRule::Fixed(0.5 * inner_dt(y, StepRule::Adaptive(1.0)));
        let h = 1e-5 * (1.0 + y.norm());
        let f = |p: Vec2| inner_duhamel(adv, e, p, tau, rule);
        let gx = (f(y + Vec2::new(h, 0.0)) - f(y - Vec2::new(h, 0.0))) / (2.0 * h);
        let gy = (f(y + Vec2::new(0.0, h)) - f(y - Vec2::new(0.0, h))) / (2.0 * h);
        let lhs = (1.0 + y.norm()) * gx.hypot(gy) + f(y).abs();
        lhs / (scale * (1.0 + y.norm()).powf(alpha))
    });
    let (k, c) = vals
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bk, bc), (k, &c)| if c > bc { (k, c) } else { (bk, bc) });
    Ok(EnvelopeReport {
        eps: adv.eps,
        constant: c,
        worst: points[k],
        samples: points.len(),
    })
}

/// One row of an envelope report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeRow {
    pub epsilon: f64,
    pub fitted_constant: f64,
}

/// CSV `epsilon,fitted_constant,slope`; `slope` is the log-log slope of the
/// constants against ε, repeated on each row.
pub fn write_envelope_csv<W: Write>(w: &mut W, rows: &[EnvelopeRow]) -> std::io::Result<()> {
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.fitted_constant).collect();
    let slope = crate::fit::loglog_slope(&xs, &ys).unwrap_or(f64::NAN);
    writeln!(w, "epsilon,fitted_constant,slope")?;
    for r in rows {
        writeln!(w, "{},{},{}", r.epsilon, r.fitted_constant, slope)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// outer problem

/// Stream function Ψ₀ + 𝓠 of the outer problem.
pub trait StreamFunction: Send + Sync {
    fn value(&self, x: Vec2, t: f64) -> f64;
    fn gradient(&self, x: Vec2, t: f64) -> Vec2;
    /// Local velocity-gradient scale, used to choose the time step.
    fn rate(&self, x: Vec2, t: f64) -> f64;
    /// Vortex centers ξ(t).
    fn centers(&self, t: f64) -> Vec<Vec2>;
}

/// Vortex centers over time.
#[derive(Clone, Debug)]
pub enum VortexPath {
    Fixed(Vec<Vec2>),
    Trajectory(Arc<Trajectory>),
}

impl VortexPath {
    pub fn at(&self, t: f64) -> Vec<Vec2> {
        match self {
            VortexPath::Fixed(p) => p.clone(),
            VortexPath::Trajectory(tr) => (0..tr.strengths.len()).map(|j| tr.position_at(j, t)).collect(),
        }
    }
}

/// Regularized vortex stream on a disk with exactly zero trace:
///
/// Ψ = −2 Σ κ_j [log(ε̃² + |z−ζ_j|²) − log(ε̃²|z|² + |1 − z ζ̄_j|²)]
///
/// in scaled coordinates z = (x−c)/a, ζ_j = (ξ_j−c)/a, ε̃ = ε/a. It equals
/// Ψ₀ + 𝓠 with 𝓠 = 2 Σ κ_j log(1 + ε̃²|z|²/|1 − z ζ̄_j|²) = O(ε²).
#[derive(Clone, Debug)]
pub struct DiskVortexStream {
    pub center: Vec2,
    pub radius: f64,
    pub eps: f64,
    pub strengths: Vec<f64>,
    pub path: VortexPath,
}

impl DiskVortexStream {
    pub fn new(domain: &DomainModel, eps: f64, strengths: Vec<f64>, path: VortexPath) -> Result<Self> {
        let (center, radius) = match domain {
            DomainModel::Disk { center, radius } => (*center, *radius),
            _ => {
                return Err(Error::InvalidInput(
                    "the closed-form vortex stream needs a disk domain".into(),
                ))
            }
        };
        if !(eps > 0.0) || strengths.is_empty() || path.at(0.0).len() != strengths.len() {
            return Err(Error::InvalidInput(
                "need ε > 0 and one path per strength".into(),
            ));
        }
        Ok(DiskVortexStream {
            center,
            radius,
            eps,
            strengths,
            path,
        })
    }

    /// 𝓠 = Ψ − Ψ₀.
    pub fn correction(&self, x: Vec2, t: f64) -> f64 {
        let et = self.eps / self.radius;
        let z = (x - self.center) / self.radius;
        self.path
            .at(t)
            .iter()
            .zip(&self.strengths)
            .map(|(xi, k)| {
                let zeta = (*xi - self.center) / self.radius;
                let d = image_term(z, zeta, 0.0);
                2.0 * k * (1.0 + et * et * z.norm_sq() / d).ln()
            })
            .sum()
    }
}

/// |1 − z ζ̄|² + ε̃²|z|².
fn image_term(z: Vec2, zeta: Vec2, et2: f64) -> f64 {
    1.0 - 2.0 * z.dot(zeta) + z.norm_sq() * zeta.norm_sq() + et2 * z.norm_sq()
}

impl StreamFunction for DiskVortexStream {
    fn value(&self, x: Vec2, t: f64) -> f64 {
        let et2 = (self.eps / self.radius).powi(2);
        let z = (x - self.center) / self.radius;
        self.path
            .at(t)
            .iter()
            .zip(&self.strengths)
            .map(|(xi, k)| {
                let zeta = (*xi - self.center) / self.radius;
                let f1 = et2 + (z - zeta).norm_sq();
                let f2 = image_term(z, zeta, et2);
                -2.0 * k * (f1.ln() - f2.ln())
            })
            .sum()
    }

    fn gradient(&self, x: Vec2, t: f64) -> Vec2 {
        let et2 = (self.eps / self.radius).powi(2);
        let z = (x - self.center) / self.radius;
        let mut g = Vec2::ZERO;
        for (xi, k) in self.path.at(t).iter().zip(&self.strengths) {
            let zeta = (*xi - self.center) / self.radius;
            let f1 = et2 + (z - zeta).norm_sq();
            let f2 = image_term(z, zeta, et2);
            let g1 = (z - zeta) * 2.0;
            let g2 = z * (2.0 * et2 + 2.0 * zeta.norm_sq()) - zeta * 2.0;
            g += (g1 / f1 - g2 / f2) * (-2.0 * k);
        }
        g / self.radius
    }

    fn rate(&self, x: Vec2, t: f64) -> f64 {
        let et2 = (self.eps / self.radius).powi(2);
        let a2 = self.radius * self.radius;
        let z = (x - self.center) / self.radius;
        self.path
            .at(t)
            .iter()
            .zip(&self.strengths)
            .map(|(xi, k)| {
                let zeta = (*xi - self.center) / self.radius;
                let f1 = et2 + (z - zeta).norm_sq();
                let f2 = image_term(z, zeta, et2);
                4.0 * k.abs() * (1.0 / f1 + 1.0 / f2) / a2
            })
            .sum()
    }

    fn centers(&self, t: f64) -> Vec<Vec2> {
        self.path.at(t)
    }
}

/// Advection field ∇⊥(Ψ₀ + 𝓠) of the outer problem on a domain.
#[derive(Clone)]
pub struct OuterAdvection {
    pub domain: DomainModel,
    stream: Arc<dyn StreamFunction>,
    /// Rotation angle allowed per step at the local rate.
    pub angle_step: f64,
    pub max_step: f64,
}

impl std::fmt::Debug for OuterAdvection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OuterAdvection")
            .field("domain", &self.domain)
            .field("angle_step", &self.angle_step)
            .field("max_step", &self.max_step)
            .finish()
    }
}

/// Escape tolerance of outer characteristics, relative to diam(Ω).
pub const ESCAPE_TOLERANCE: f64 = 1e-6;

impl OuterAdvection {
    /// Checks the zero boundary trace of the stream on disk domains.
    pub fn new(domain: DomainModel, stream: Arc<dyn StreamFunction>) -> Result<Self> {
        if let DomainModel::Disk { center, radius } = &domain {
            let scale = stream.value(*center, 0.0).abs().max(1.0);
            for i in 0..64 {
                let x = *center + Vec2::polar(*radius, std::f64::consts::TAU * i as f64 / 64.0);
                let v = stream.value(x, 0.0);
                if v.abs() > 1e-10 * scale {
                    return Err(Error::Precondition(format!(
                        "stream trace {v:e} on the boundary is not zero"
                    )));
                }
            }
        }
        Ok(OuterAdvection {
            domain,
            stream,
            angle_step: 0.01,
            max_step: 1e-2,
        })
    }

    pub fn stream(&self) -> &dyn StreamFunction {
        self.stream.as_ref()
    }

    pub fn velocity(&self, x: Vec2, t: f64) -> Vec2 {
        self.stream.gradient(x, t).perp()
    }

    fn dt(&self, x: Vec2, t: f64, rule: StepRule) -> f64 {
        match rule {
            StepRule::Adaptive(scale) => {
                scale * self.max_step.min(self.angle_step / self.stream.rate(x, t).max(1e-300))
            }
            StepRule::Fixed(h) => h,
        }
    }

    fn step(&self, x: Vec2, t: f64, h: f64) -> Vec2 {
        let k1 = self.velocity(x, t);
        let k2 = self.velocity(x + k1 * (0.5 * h), t + 0.5 * h);
        let k3 = self.velocity(x + k2 * (0.5 * h), t + 0.5 * h);
        let k4 = self.velocity(x + k3 * h, t + h);
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }

    fn walk<F: FnMut(f64, Vec2)>(&self, x: Vec2, t0: f64, t1: f64, rule: StepRule, mut visit: F) -> Result<Vec2> {
        let tol = ESCAPE_TOLERANCE * self.domain.diameter();
        let dir = if t1 >= t0 { 1.0 } else { -1.0 };
        let (mut t, mut p) = (t0, x);
        visit(t, p);
        while (t1 - t) * dir > 0.0 {
            let h = self.dt(p, t, rule).min((t1 - t) * dir);
            p = self.step(p, t, h * dir);
            t = if ((t1 - t) * dir - h).abs() <= 1e-14 * t1.abs().max(1.0) { t1 } else { t + h * dir };
            if !p.is_finite() || self.domain.boundary_distance(p) < -tol {
                return Err(Error::Geometry(format!(
                    "characteristic from ({}, {}) reached ({}, {}) at t = {t}",
                    x.x, x.y, p.x, p.y
                )));
            }
            visit(t, p);
        }
        Ok(p)
    }
}

/// x̄(s; t, x): the outer characteristic through x at time t, at time s.
pub fn outer_characteristic(adv: &OuterAdvection, t: f64, x: Vec2, s: f64) -> Result<Vec2> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::InvalidInput(format!("times must be nonnegative (got {t}, {s})")));
    }
    adv.domain.check_interior(x)?;
    adv.walk(x, t, s, StepRule::Adaptive(1.0), |_, _| {})
}

fn outer_duhamel<E>(adv: &OuterAdvection, e: &E, x: Vec2, t: f64, rule: StepRule) -> Result<f64>
where
    E: Fn(Vec2, f64) -> f64 + ?Sized,
{
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    adv.walk(x, t, 0.0, rule, |s, p| {
        let v = e(p, s);
        if let Some((s0, v0)) = prev {
            acc += 0.5 * (v0 + v) * (s0 - s);
        }
        prev = Some((s, v));
    })?;
    Ok(acc)
}

/// φ(x, t) = ∫_0^t E(x̄(s; t, x), s) ds at each point.
pub fn solve_outer<E>(adv: &OuterAdvection, e: &E, points: &[Vec2], t: f64) -> Result<Vec<f64>>
where
    E: Fn(Vec2, f64) -> f64 + Sync,
{
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("t must be nonnegative (got {t})")));
    }
    for p in points {
        adv.domain.check_interior(*p)?;
    }
    crate::par::map_slice(points, |&x| outer_duhamel(adv, e, x, t, StepRule::Adaptive(1.0)))
        .into_iter()
        .collect()
}

/// Lattice of `cells` intervals across the domain's bounding box with the
/// interior mask.
pub fn domain_lattice(domain: &DomainModel, cells: usize) -> Result<(Lattice, Vec<bool>)> {
    let shape = domain.shape();
    let lat = Lattice::covering(&shape, cells)?;
    let mask = lat.mask_for(&shape);
    Ok((lat, mask))
}

/// φ(·, t) on the interior nodes of a lattice.
pub fn solve_outer_field<E>(adv: &OuterAdvection, e: &E, cells: usize, t: f64) -> Result<ScalarField2D>
where
    E: Fn(Vec2, f64) -> f64 + Sync,
{
    let (lat, mask) = domain_lattice(&adv.domain, cells)?;
    let idx: Vec<usize> = (0..lat.len()).filter(|&k| mask[k]).collect();
    let pts: Vec<Vec2> = idx.iter().map(|&k| lat.node_at(k)).collect();
    let vals = solve_outer(adv, e, &pts, t)?;
    let mut f = ScalarField2D::zeros(lat, mask);
    for (k, v) in idx.into_iter().zip(vals) {
        f.values[k] = v;
    }
    f.time = t;
    Ok(f)
}

fn lp_norms(f: &ScalarField2D) -> (f64, f64) {
    let h2 = f.lattice.h * f.lattice.h;
    let l2 = f
        .values
        .iter()
        .zip(&f.mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        * h2;
    (l2.sqrt(), f.max_abs())
}

/// Measured sides of ‖φ(·,t)‖_p ≤ t sup_s ‖E(·,s)‖_p for p = 2 and ∞.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpReport {
    pub phi_l2: f64,
    pub bound_l2: f64,
    pub phi_linf: f64,
    pub bound_linf: f64,
}

impl LpReport {
    /// Largest relative excess of the left side over the bound (0 if both hold).
    pub fn violation(&self) -> f64 {
        let r = |a: f64, b: f64| if b > 0.0 { (a / b - 1.0).max(0.0) } else if a > 0.0 { f64::INFINITY } else { 0.0 };
        r(self.phi_l2, self.bound_l2).max(r(self.phi_linf, self.bound_linf))
    }
}

/// Evaluates both sides of the L^p bound on a lattice; the sup over s uses
/// `n_s + 1` equally spaced times.
pub fn outer_lp_check<E>(adv: &OuterAdvection, e: &E, cells: usize, t: f64, n_s: usize) -> Result<LpReport>
where
    E: Fn(Vec2, f64) -> f64 + Sync,
{
    let phi = solve_outer_field(adv, e, cells, t)?;
    let (p2, pinf) = lp_norms(&phi);
    let (lat, mask) = (phi.lattice, phi.mask.clone());
    let (mut s2, mut sinf) = (0.0f64, 0.0f64);
    for i in 0..=n_s.max(1) {
        let s = t * i as f64 / n_s.max(1) as f64;
        let f = ScalarField2D::from_fn(lat, mask.clone(), |x| e(x, s));
        let (a, b) = lp_norms(&f);
        s2 = s2.max(a);
        sinf = sinf.max(b);
    }
    Ok(LpReport {
        phi_l2: p2,
        bound_l2: t * s2,
        phi_linf: pinf,
        bound_linf: t * sinf,
    })
}

/// (‖E(x̄(s; t, ·), s)‖_{L²(Ω)}, ‖E(·, s)‖_{L²(Ω)}) on a lattice; equal up to
/// quadrature error since the flow map is area preserving.
pub fn area_preservation<E>(adv: &OuterAdvection, e: &E, cells: usize, t: f64, s: f64) -> Result<(f64, f64)>
where
    E: Fn(Vec2, f64) -> f64 + Sync,
{
    let (lat, mask) = domain_lattice(&adv.domain, cells)?;
    let idx: Vec<usize> = (0..lat.len()).filter(|&k| mask[k]).collect();
    let moved: Vec<Result<f64>> = crate::par::map_slice(&idx, |&k| {
        let p = adv.walk(lat.node_at(k), t, s, StepRule::Adaptive(1.0), |_, _| {})?;
        Ok(e(p, s))
    });
    let mut pulled = ScalarField2D::zeros(lat, mask.clone());
    for (k, v) in idx.iter().zip(moved) {
        pulled.values[*k] = v?;
    }
    let direct = ScalarField2D::from_fn(lat, mask, |x| e(x, s));
    Ok((lp_norms(&pulled).0, lp_norms(&direct).0))
}

/// Result of the support-propagation measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportReport {
    /// Largest sampled β with φ ≡ 0 on ∪B_{βδ}(ξ_j(t)) at every sampled t.
    pub beta: f64,
    /// β per sampled time.
    pub per_time: Vec<(f64, f64)>,
}

/// Threshold below which φ counts as zero.
pub const SUPPORT_ZERO: f64 = 1e-12;

/// Measures β on circles of radius (m/n_rad)δ, m = 0..n_rad, around each
/// center at each sampled time. E must vanish on ∪B_δ(ξ_j(t)).
pub fn support_propagation_check<E>(
    adv: &OuterAdvection,
    e: &E,
    delta: f64,
    times: &[f64],
    n_rad: usize,
    n_ang: usize,
) -> Result<SupportReport>
where
    E: Fn(Vec2, f64) -> f64 + Sync,
{
    if !(delta > 0.0) || n_rad == 0 || n_ang == 0 || times.is_empty() {
        return Err(Error::InvalidInput("support check needs δ > 0 and nonempty samples".into()));
    }
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    for k in 0..=32 {
        let s = t_end * k as f64 / 32.0;
        for c in adv.stream().centers(s) {
            for i in 0..8 {
                for j in 0..16 {
                    let x = c + Vec2::polar(delta * i as f64 / 8.0 * 0.999, std::f64::consts::TAU * j as f64 / 16.0);
                    if e(x, s) != 0.0 {
                        return Err(Error::Precondition(format!(
                            "E does not vanish within δ of a vortex at t = {s}"
                        )));
                    }
                }
            }
        }
    }
    let mut per_time = Vec::new();
    for &t in times {
        let centers = adv.stream().centers(t);
        let mut beta = 1.0;
        for m in 0..=n_rad {
            let r = delta * m as f64 / n_rad as f64;
            let mut pts = Vec::new();
            for c in &centers {
                if m == 0 {
                    pts.push(*c);
                } else {
                    for j in 0..n_ang {
                        pts.push(*c + Vec2::polar(r, std::f64::consts::TAU * j as f64 / n_ang as f64));
                    }
                }
            }
            pts.retain(|p| adv.domain.contains(*p));
            let vals = solve_outer(adv, e, &pts, t)?;
            if vals.iter().any(|v| v.abs() >= SUPPORT_ZERO) {
                beta = if m == 0 { 0.0 } else { (m - 1) as f64 / n_rad as f64 };
                break;
            }
        }
        per_time.push((t, beta));
    }
    let beta = per_time.iter().map(|p| p.1).fold(1.0, f64::min);
    Ok(SupportReport { beta, per_time })
}

/// max over the points of (|∇φ| + |φ_t| + |φ|)/A at time t, by central
/// differences with a fixed step so neighbors share the step sequence.
pub fn outer_gradient_constant<E>(adv: &OuterAdvection, e: &E, a: f64, points: &[Vec2], t: f64, dt: f64) -> Result<f64>
where
    E: Fn(Vec2, f64) -> f64 + Sync,
{
    if !(a > 0.0 && dt > 0.0 && t > 2.0 * dt) {
        return Err(Error::InvalidInput("need A > 0 and 0 < 2dt < t".into()));
    }
    let rule = StepRule::Fixed(dt);
    let h = 1e-5 * adv.domain.diameter();
    let vals: Vec<Result<f64>> = crate::par::map_slice(points, |&x| {
        let f = |p: Vec2, s: f64| outer_duhamel(adv, e, p, s, rule);
        let gx = (f(x + Vec2::new(h, 0.0), t)? - f(x - Vec2::new(h, 0.0), t)?) / (2.0 * h);
        let gy = (f(x + Vec2::new(0.0, h), t)? - f(x - Vec2::new(0.0, h), t)?) / (2.0 * h);
        // time derivative along whole steps keeps the quadrature nodes aligned
        let ft = (f(x, t + dt)? - f(x, t - dt)?) / (2.0 * dt);
        Ok(gx.hypot(gy) + ft.abs() + f(x, t)?.abs())
    });
    let mut worst = 0.0f64;
    for v in vals {
        worst = worst.max(v?);
    }
    Ok(worst / a)
}
