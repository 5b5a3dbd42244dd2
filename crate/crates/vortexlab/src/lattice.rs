//! Uniform lattices and masked scalar fields on them.

use crate::error::{Error, Result};
use crate::geometry::{Shape, Vec2};

/// Nodes x_{ij} = origin + (i h, j h), 0 ≤ i < nx, 0 ≤ j < ny.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    pub origin: Vec2,
    pub h: f64,
}

impl Lattice {
    pub fn new(nx: usize, ny: usize, origin: Vec2, h: f64) -> Result<Self> {
        if nx < 3 || ny < 3 || !(h > 0.0) || !origin.is_finite() {
            return Err(Error::InvalidInput(format!(
                "lattice needs nx, ny >= 3 and h > 0 (got {nx}x{ny}, h = {h})"
            )));
        }
        Ok(Lattice { nx, ny, origin, h })
    }

    /// Lattice whose nodes include the corners of the bounding box of `shape`,
    /// with `cells` intervals across its larger side.
    pub fn covering(shape: &Shape, cells: usize) -> Result<Self> {
        let (lo, hi) = shape.bounding_box();
        let w = (hi.x - lo.x).max(hi.y - lo.y);
        let h = w / cells as f64;
        let nx = ((hi.x - lo.x) / h).round() as usize + 1;
        let ny = ((hi.y - lo.y) / h).round() as usize + 1;
        Lattice::new(nx, ny, lo, h)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + i as f64 * self.h,
            self.origin.y + j as f64 * self.h,
        )
    }

    pub fn node_at(&self, k: usize) -> Vec2 {
        let (i, j) = self.coords(k);
        self.node(i, j)
    }

    /// Nodes strictly inside `shape`, keeping a tiny margin so that no
    /// interior node sits on the boundary itself.
    pub fn mask_for(&self, shape: &Shape) -> Vec<bool> {
        let margin = 1e-9 * self.h;
        (0..self.len())
            .map(|k| shape.boundary_distance(self.node_at(k)) > margin)
            .collect()
    }

    /// Continuous lattice coordinates of `p`.
    fn frac(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.origin.x) / self.h, (p.y - self.origin.y) / self.h)
    }
}

/// How values between lattice nodes are reconstructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    Bilinear,
    /// Catmull–Rom (Keys a = −1/2) cubic convolution; exact on quadratics.
    Cubic,
}

/// Grid-sampled scalar on a lattice with an interior mask. Values outside the
/// mask are kept (stream functions store zero there).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField2D {
    pub lattice: Lattice,
    pub mask: Vec<bool>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl ScalarField2D {
    pub fn zeros(lattice: Lattice, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), lattice.len());
        ScalarField2D {
            values: vec![0.0; lattice.len()],
            lattice,
            mask,
            time: 0.0,
        }
    }

    /// Sample `f` on masked nodes; zero elsewhere.
    pub fn from_fn<F>(lattice: Lattice, mask: Vec<bool>, f: F) -> Self
    where
        F: Fn(Vec2) -> f64 + Sync + Send,
    {
        let nx = lattice.nx;
        let mut values = vec![0.0; lattice.len()];
        crate::par::for_each_chunk_mut(&mut values, nx, |j, row| {
            for (i, v) in row.iter_mut().enumerate() {
                if mask[j * nx + i] {
                    *v = f(lattice.node(i, j));
                }
            }
        });
        ScalarField2D {
            lattice,
            mask,
            values,
            time: 0.0,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.lattice.index(i, j)]
    }

    fn get_clamped(&self, i: isize, j: isize) -> f64 {
        if i < 0 || j < 0 || i >= self.lattice.nx as isize || j >= self.lattice.ny as isize {
            return 0.0;
        }
        self.values[self.lattice.index(i as usize, j as usize)]
    }

    pub fn interpolate(&self, p: Vec2, scheme: Interpolation) -> f64 {
        match scheme {
            Interpolation::Bilinear => self.bilinear(p),
            Interpolation::Cubic => self.cubic(p),
        }
    }

    /// Bilinear interpolation; the field is taken as zero off the lattice.
    pub fn bilinear(&self, p: Vec2) -> f64 {
        let (fx, fy) = self.lattice.frac(p);
        let i0 = fx.floor();
        let j0 = fy.floor();
        let (a, b) = (fx - i0, fy - j0);
        let (i0, j0) = (i0 as isize, j0 as isize);
        let v00 = self.get_clamped(i0, j0);
        let v10 = self.get_clamped(i0 + 1, j0);
        let v01 = self.get_clamped(i0, j0 + 1);
        let v11 = self.get_clamped(i0 + 1, j0 + 1);
        (1.0 - b) * ((1.0 - a) * v00 + a * v10) + b * ((1.0 - a) * v01 + a * v11)
    }

    /// Catmull–Rom bicubic interpolation; zero off the lattice.
    pub fn cubic(&self, p: Vec2) -> f64 {
        self.cubic_with(None, p).0
    }

    /// Cubic interpolation of two fields on the same lattice, sharing the
    /// stencil weights.
    pub fn cubic_pair(&self, other: &ScalarField2D, p: Vec2) -> (f64, f64) {
        debug_assert_eq!(self.lattice, other.lattice);
        self.cubic_with(Some(other), p)
    }

    fn cubic_with(&self, other: Option<&ScalarField2D>, p: Vec2) -> (f64, f64) {
        let (fx, fy) = self.lattice.frac(p);
        let i0 = fx.floor();
        let j0 = fy.floor();
        let wx = catmull_rom(fx - i0);
        let wy = catmull_rom(fy - j0);
        let (i0, j0) = (i0 as isize - 1, j0 as isize - 1);
        let (nx, ny) = (self.lattice.nx as isize, self.lattice.ny as isize);
        let row = |v: &[f64]| wx[0] * v[0] + wx[1] * v[1] + wx[2] * v[2] + wx[3] * v[3];
        let (mut a, mut b) = (0.0, 0.0);
        if i0 >= 0 && j0 >= 0 && i0 + 3 < nx && j0 + 3 < ny {
            for (dj, wyj) in wy.iter().enumerate() {
                let k = self.lattice.index(i0 as usize, j0 as usize + dj);
                a += wyj * row(&self.values[k..k + 4]);
                if let Some(o) = other {
                    b += wyj * row(&o.values[k..k + 4]);
                }
            }
        } else {
            for (dj, wyj) in wy.iter().enumerate() {
                let j = j0 + dj as isize;
                let va: [f64; 4] = std::array::from_fn(|di| self.get_clamped(i0 + di as isize, j));
                a += wyj * row(&va);
                if let Some(o) = other {
                    let vb: [f64; 4] = std::array::from_fn(|di| o.get_clamped(i0 + di as isize, j));
                    b += wyj * row(&vb);
                }
            }
        }
        (a, b)
    }

    /// Σ values·h² over the mask.
    pub fn integrate(&self) -> f64 {
        let h2 = self.lattice.h * self.lattice.h;
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v)
            .sum::<f64>()
            * h2
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold(0.0f64, |m, (v, _)| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold(f64::NEG_INFINITY, |m, (v, _)| m.max(*v))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Weights for the four nodes around a point at fractional offset `t`.
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}
