//! Green function G = Γ − H, regular part H, Robin function H(ξ, ξ) and the
//! Kirchhoff–Routh energy, with the normalization −ΔG = 8πδ and
//! Γ(x) = 4 log(1/|x|).
//!
//! Two domain kinds are provided: the disk, in closed form by the method of
//! images, and lattice domains where H(·, ξ) is a discrete harmonic solve with
//! boundary data Γ(· − ξ).

use crate::error::{Error, Result};
use crate::geometry::{Shape, Vec2};
use crate::lattice::{Lattice, ScalarField2D};
use crate::poisson::{BoundaryTreatment, DirichletLaplacian};
use num_complex::Complex64;
use std::sync::Arc;

/// Relative (to the diameter) distance below which two vortices collide.
pub const COLLISION_THRESHOLD: f64 = 1e-6;

/// Γ(x) = 4 log(1/|x|).
pub fn gamma_fundamental(x: Vec2) -> Result<f64> {
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::Singularity("Γ evaluated at the origin".into()));
    }
    Ok(-4.0 * r.ln())
}

/// ∇Γ(x) = −4x/|x|².
pub fn grad_gamma(x: Vec2) -> Vec2 {
    x * (-4.0 / x.norm_sq())
}

/// ∇_x log|w(x)| for holomorphic w with derivative `dw` at x.
fn grad_log_abs(w: Complex64, dw: Complex64) -> Vec2 {
    let q = dw / w;
    Vec2::new(q.re, -q.im)
}

/// Lattice-backed domain: Shortley–Weller discrete Laplacian, factored once.
#[derive(Debug)]
pub struct GridDomain {
    laplacian: DirichletLaplacian,
}

impl GridDomain {
    pub fn new(shape: Shape, cells: usize) -> Result<Self> {
        let lattice = Lattice::covering(&shape, cells)?;
        Ok(GridDomain {
            laplacian: DirichletLaplacian::new(lattice, shape, BoundaryTreatment::ShortleyWeller)?,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        self.laplacian.lattice()
    }

    pub fn h(&self) -> f64 {
        self.lattice().h
    }

    /// H(·, ξ) on the lattice. Nodes off the mask carry the boundary data
    /// Γ(x − ξ), which keeps interpolation continuous up to the boundary.
    pub fn regular_field(&self, xi: Vec2) -> ScalarField2D {
        let lat = *self.lattice();
        let g = |p: Vec2| -4.0 * (p - xi).norm().ln();
        let zero = vec![0.0; lat.len()];
        let mut values = self.laplacian.solve(&zero, g);
        let mask = self.laplacian.mask().to_vec();
        for k in 0..lat.len() {
            if !mask[k] {
                values[k] = g(lat.node_at(k));
            }
        }
        ScalarField2D {
            lattice: lat,
            mask,
            values,
            time: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub enum DomainModel {
    /// Disk of the given center and radius, in closed form.
    Disk { center: Vec2, radius: f64 },
    Grid(Arc<GridDomain>),
}

impl DomainModel {
    pub fn unit_disk() -> Self {
        DomainModel::Disk {
            center: Vec2::ZERO,
            radius: 1.0,
        }
    }

    pub fn disk(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.is_finite()) {
            return Err(Error::InvalidInput(format!("disk radius {radius}")));
        }
        Ok(DomainModel::Disk { center, radius })
    }

    /// Lattice domain on `shape` with `cells` intervals across its bounding box.
    pub fn grid(shape: Shape, cells: usize) -> Result<Self> {
        Ok(DomainModel::Grid(Arc::new(GridDomain::new(shape, cells)?)))
    }

    pub fn shape(&self) -> Shape {
        match self {
            DomainModel::Disk { center, radius } => Shape::Disk {
                center: *center,
                radius: *radius,
            },
            DomainModel::Grid(g) => *g.laplacian.shape(),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.shape().diameter()
    }

    pub fn contains(&self, x: Vec2) -> bool {
        x.is_finite() && self.shape().contains(x)
    }

    pub fn boundary_distance(&self, x: Vec2) -> f64 {
        self.shape().boundary_distance(x)
    }

    pub fn check_interior(&self, x: Vec2) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("({}, {}) is not interior", x.x, x.y)))
        }
    }

    /// Regular part H(x, ξ).
    pub fn regular_part(&self, x: Vec2, xi: Vec2) -> Result<f64> {
        self.check_interior(x)?;
        self.check_interior(xi)?;
        Ok(match self {
            DomainModel::Disk { center, radius } => {
                let (z, w) = ((x - *center).to_complex(), (xi - *center).to_complex());
                -4.0 * ((radius * radius - z * w.conj()).norm() / radius).ln()
            }
            DomainModel::Grid(g) => g.regular_field(xi).bilinear(x),
        })
    }

    /// ∇_x H(x, ξ).
    pub fn grad_regular_part(&self, x: Vec2, xi: Vec2) -> Result<Vec2> {
        self.check_interior(x)?;
        self.check_interior(xi)?;
        Ok(match self {
            DomainModel::Disk { center, radius } => {
                let (z, w) = ((x - *center).to_complex(), (xi - *center).to_complex());
                grad_log_abs(radius * radius - z * w.conj(), -w.conj()) * -4.0
            }
            DomainModel::Grid(g) => {
                let f = g.regular_field(xi);
                grid_gradient(&f, x)
            }
        })
    }

    pub fn green(&self, x: Vec2, xi: Vec2) -> Result<f64> {
        self.check_interior(x)?;
        self.check_interior(xi)?;
        if (x - xi).norm() <= 1e-14 * self.diameter() {
            return Err(Error::Singularity("green evaluated at x = ξ".into()));
        }
        match self {
            DomainModel::Disk { center, radius } => {
                let (z, w) = ((x - *center).to_complex(), (xi - *center).to_complex());
                let a2 = radius * radius;
                Ok(4.0 * ((a2 - z * w.conj()).norm() / (radius * (z - w).norm())).ln())
            }
            DomainModel::Grid(_) => Ok(gamma_fundamental(x - xi)? - self.regular_part(x, xi)?),
        }
    }

    /// ∇_x G(x, ξ).
    pub fn grad_green(&self, x: Vec2, xi: Vec2) -> Result<Vec2> {
        if (x - xi).norm() <= 1e-14 * self.diameter() {
            return Err(Error::Singularity("green gradient at x = ξ".into()));
        }
        Ok(grad_gamma(x - xi) - self.grad_regular_part(x, xi)?)
    }

    /// Robin function H(ξ, ξ).
    pub fn robin(&self, xi: Vec2) -> Result<f64> {
        self.regular_part(xi, xi)
    }
}

/// Gradient of the Catmull–Rom interpolant of a lattice field.
fn grid_gradient(f: &ScalarField2D, x: Vec2) -> Vec2 {
    let d = 1e-3 * f.lattice.h;
    let ex = Vec2::new(d, 0.0);
    let ey = Vec2::new(0.0, d);
    Vec2::new(
        (f.cubic(x + ex) - f.cubic(x - ex)) / (2.0 * d),
        (f.cubic(x + ey) - f.cubic(x - ey)) / (2.0 * d),
    )
}

/// Vortex positions ξ_j and strengths κ_j.
#[derive(Clone, Debug, PartialEq)]
pub struct VortexConfiguration {
    pub positions: Vec<Vec2>,
    pub strengths: Vec<f64>,
}

impl VortexConfiguration {
    pub fn new(positions: Vec<Vec2>, strengths: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidInput("empty vortex configuration".into()));
        }
        if positions.len() != strengths.len() {
            return Err(Error::InvalidInput(format!(
                "{} positions but {} strengths",
                positions.len(),
                strengths.len()
            )));
        }
        if positions.iter().any(|p| !p.is_finite()) || strengths.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidInput("non-finite vortex data".into()));
        }
        Ok(VortexConfiguration {
            positions,
            strengths,
        })
    }

    pub fn single(position: Vec2, strength: f64) -> Self {
        VortexConfiguration {
            positions: vec![position],
            strengths: vec![strength],
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Smallest pairwise distance (∞ for a single vortex).
    pub fn min_pairwise(&self) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                d = d.min((self.positions[i] - self.positions[j]).norm());
            }
        }
        d
    }

    /// Interior and collision-free.
    pub fn validate(&self, domain: &DomainModel) -> Result<()> {
        for p in &self.positions {
            domain.check_interior(*p)?;
        }
        let d = self.min_pairwise();
        if d < COLLISION_THRESHOLD * domain.diameter() {
            return Err(Error::Collision {
                time: None,
                detail: format!("min pairwise distance {d:e}"),
            });
        }
        Ok(())
    }
}

/// K = −½ Σ κ_i² H(ξ_i, ξ_i) + ½ Σ_{i≠j} κ_i κ_j G(ξ_i, ξ_j).
pub fn kirchhoff_routh(domain: &DomainModel, cfg: &VortexConfiguration) -> Result<f64> {
    cfg.validate(domain)?;
    let n = cfg.len();
    match domain {
        DomainModel::Disk { .. } => {
            let mut k = 0.0;
            for i in 0..n {
                let ki = cfg.strengths[i];
                k -= 0.5 * ki * ki * domain.robin(cfg.positions[i])?;
                for j in i + 1..n {
                    k += ki * cfg.strengths[j] * domain.green(cfg.positions[i], cfg.positions[j])?;
                }
            }
            Ok(k)
        }
        DomainModel::Grid(g) => {
            let fields: Vec<ScalarField2D> =
                crate::par::map_slice(&cfg.positions, |&xi| g.regular_field(xi));
            let mut k = 0.0;
            for i in 0..n {
                let (xi, ki) = (cfg.positions[i], cfg.strengths[i]);
                k -= 0.5 * ki * ki * fields[i].bilinear(xi);
                for j in 0..n {
                    if j != i {
                        let xj = cfg.positions[j];
                        let gij = gamma_fundamental(xi - xj)? - fields[j].bilinear(xi);
                        k += 0.5 * ki * cfg.strengths[j] * gij;
                    }
                }
            }
            Ok(k)
        }
    }
}

/// ∇_{ξ_j} K for every j (not yet rotated).
pub fn grad_k(domain: &DomainModel, cfg: &VortexConfiguration) -> Result<Vec<Vec2>> {
    cfg.validate(domain)?;
    let n = cfg.len();
    match domain {
        DomainModel::Disk { .. } => (0..n)
            .map(|j| {
                let (xj, kj) = (cfg.positions[j], cfg.strengths[j]);
                let mut g = domain.grad_regular_part(xj, xj)? * (-kj * kj);
                for i in 0..n {
                    if i != j {
                        g += domain.grad_green(xj, cfg.positions[i])? * (kj * cfg.strengths[i]);
                    }
                }
                Ok(g)
            })
            .collect(),
        DomainModel::Grid(g) => grid_grad_k(g, domain.diameter(), cfg),
    }
}

/// Fourth-order central differences of the j-dependent part of K.
fn grid_grad_k(g: &GridDomain, diam: f64, cfg: &VortexConfiguration) -> Result<Vec<Vec2>> {
    let n = cfg.len();
    let step = 1e-4 * diam;
    let fields: Vec<ScalarField2D> =
        crate::par::map_slice(&cfg.positions, |&xi| g.regular_field(xi));
    const OFFS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
    const W: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
    // task t = (j, axis, offset)
    let tasks = n * 2 * 4;
    let values: Vec<Result<f64>> = crate::par::map_range(tasks, |t| {
        let (j, rest) = (t / 8, t % 8);
        let (axis, o) = (rest / 4, rest % 4);
        let e = if axis == 0 {
            Vec2::new(1.0, 0.0)
        } else {
            Vec2::new(0.0, 1.0)
        };
        let xp = cfg.positions[j] + e * (OFFS[o] * step);
        let kj = cfg.strengths[j];
        let fp = g.regular_field(xp);
        let mut v = -0.5 * kj * kj * fp.bilinear(xp);
        for i in 0..n {
            if i != j {
                let xi = cfg.positions[i];
                let gamma = gamma_fundamental(xi - xp)?;
                let g_ij = gamma - fp.bilinear(xi);
                let g_ji = gamma - fields[i].bilinear(xp);
                v += kj * cfg.strengths[i] * 0.5 * (g_ij + g_ji);
            }
        }
        Ok(v)
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok((0..n)
        .map(|j| {
            let d = |axis: usize| {
                (0..4)
                    .map(|o| W[o] * values[j * 8 + axis * 4 + o])
                    .sum::<f64>()
                    / (12.0 * step)
            };
            Vec2::new(d(0), d(1))
        })
        .collect())
}

/// ∇⊥_{ξ_j} K with (a, b)⊥ = (b, −a).
pub fn grad_perp_k(domain: &DomainModel, cfg: &VortexConfiguration) -> Result<Vec<Vec2>> {
    Ok(grad_k(domain, cfg)?.into_iter().map(Vec2::perp).collect())
}
