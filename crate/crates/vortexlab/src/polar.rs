//! Fields sampled on a polar grid (log-spaced radii × uniform angles) with
//! per-radius FFT mode decomposition.

use crate::error::Result;
use crate::geometry::Vec2;
use crate::radial::LogGrid;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq)]
pub struct PolarGrid {
    pub radial: LogGrid,
    pub n_theta: usize,
}

impl PolarGrid {
    pub fn new(rho_min: f64, rho_max: f64, n_rho: usize, n_theta: usize) -> Result<Arc<Self>> {
        Ok(Arc::new(PolarGrid {
            radial: LogGrid::new(rho_min, rho_max, n_rho)?,
            n_theta,
        }))
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_theta as f64
    }

    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        Vec2::polar(self.radial.rho[i], self.theta(j))
    }

    pub fn n_rho(&self) -> usize {
        self.radial.len()
    }

    pub fn len(&self) -> usize {
        self.n_rho() * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Angular Fourier coefficients c_m(ρ_i), m = 0..=n_theta/2, normalised so
/// that f(ρ, θ) = Σ_m c_m e^{imθ} over m ∈ (−n/2, n/2] with c_{−m} = conj(c_m).
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTable {
    pub coeffs: Vec<Vec<Complex64>>,
}

impl ModeTable {
    pub fn mode(&self, m: usize) -> &[Complex64] {
        &self.coeffs[m]
    }

    /// Σ_i |c_m(ρ_i)|² for each m; a crude per-mode energy for leakage tests.
    pub fn energies(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolarField {
    pub grid: Arc<PolarGrid>,
    /// row-major: values[i * n_theta + j] at (ρ_i, θ_j)
    pub values: Vec<f64>,
}

impl PolarField {
    pub fn zeros(grid: Arc<PolarGrid>) -> Self {
        let n = grid.len();
        PolarField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn<F>(grid: Arc<PolarGrid>, f: F) -> Self
    where
        F: Fn(Vec2) -> f64 + Sync + Send,
    {
        let nt = grid.n_theta;
        let mut values = vec![0.0; grid.len()];
        let g = grid.clone();
        crate::par::for_each_chunk_mut(&mut values, nt, |i, row| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(g.point(i, j));
            }
        });
        PolarField { grid, values }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nt = self.grid.n_theta;
        &self.values[i * nt..(i + 1) * nt]
    }

    pub fn map<F: Fn(Vec2, f64) -> f64 + Sync + Send>(&self, f: F) -> PolarField {
        let nt = self.grid.n_theta;
        let mut values = self.values.clone();
        let g = self.grid.clone();
        crate::par::for_each_chunk_mut(&mut values, nt, |i, row| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(g.point(i, j), *v);
            }
        });
        PolarField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &PolarField, f: F) -> PolarField {
        assert_eq!(self.values.len(), other.values.len());
        PolarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> PolarField {
        PolarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, x: &PolarField) {
        for (v, w) in self.values.iter_mut().zip(&x.values) {
            *v += a * w;
        }
    }

    /// Angular means ⟨f⟩(ρ_i).
    pub fn angular_mean(&self) -> Vec<f64> {
        let nt = self.grid.n_theta as f64;
        (0..self.grid.n_rho())
            .map(|i| self.row(i).iter().sum::<f64>() / nt)
            .collect()
    }

    /// ∫ f dy over ρ ≤ rho_max of the grid (the disk below ρ_min is neglected).
    pub fn integrate(&self) -> f64 {
        2.0 * PI * self.grid.radial.integrate_rho(&self.angular_mean())
    }

    /// ∫_{|y| < r} f dy for r inside the grid range.
    pub fn integrate_within(&self, r: f64) -> f64 {
        let g = &self.grid.radial;
        let mean = self.angular_mean();
        let h: Vec<f64> = mean.iter().zip(&g.rho).map(|(m, p)| m * p * p).collect();
        let c = g.cumulative_forward(&h);
        2.0 * PI * g.interp(&c, r)
    }

    /// ∫ f g dy.
    pub fn inner(&self, other: &PolarField) -> f64 {
        self.zip_with(other, |a, b| a * b).integrate()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// L² norm over the grid.
    pub fn l2(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn modes(&self) -> ModeTable {
        let nt = self.grid.n_theta;
        let nr = self.grid.n_rho();
        let fft = FftPlanner::<f64>::new().plan_fft_forward(nt);
        let rows: Vec<Vec<Complex64>> = crate::par::map_range(nr, |i| {
            let mut buf: Vec<Complex64> =
                self.row(i).iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.process(&mut buf);
            buf.truncate(nt / 2 + 1);
            buf.iter().map(|z| z / nt as f64).collect()
        });
        let coeffs = (0..=nt / 2)
            .map(|m| rows.iter().map(|r| r[m]).collect())
            .collect();
        ModeTable { coeffs }
    }

    pub fn from_modes(grid: Arc<PolarGrid>, table: &ModeTable) -> PolarField {
        let nt = grid.n_theta;
        let nr = grid.n_rho();
        let ifft = FftPlanner::<f64>::new().plan_fft_inverse(nt);
        let mut values = vec![0.0; grid.len()];
        crate::par::for_each_chunk_mut(&mut values, nt, |i, row| {
            let mut buf = vec![Complex64::new(0.0, 0.0); nt];
            for m in 0..=nt / 2 {
                let c = table.coeffs[m][i];
                buf[m] = c;
                if m != 0 && m != nt - m {
                    buf[nt - m] = c.conj();
                }
            }
            ifft.process(&mut buf);
            for (v, z) in row.iter_mut().zip(&buf) {
                *v = z.re;
            }
        });
        debug_assert_eq!(values.len(), nr * nt);
        PolarField { grid, values }
    }
}
