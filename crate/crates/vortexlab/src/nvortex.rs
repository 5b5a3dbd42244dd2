//! Kirchhoff–Routh point-vortex dynamics: κ_j ξ̇_j = ∇⊥_{ξ_j} K(ξ).

use crate::domain_green::{grad_perp_k, kirchhoff_routh, DomainModel, VortexConfiguration};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use std::io::Write;

/// Guard distance, as a fraction of the domain diameter, for collisions and
/// boundary approach during integration.
pub const GUARD: f64 = 1e-3;

/// ξ̇_j = κ_j⁻¹ ∇⊥_{ξ_j} K.
pub fn vortex_rhs(domain: &DomainModel, cfg: &VortexConfiguration) -> Result<Vec<Vec2>> {
    if let Some(j) = cfg.strengths.iter().position(|&k| k == 0.0) {
        return Err(Error::DegenerateStrength(format!("κ_{} = 0", j + 1)));
    }
    let g = grad_perp_k(domain, cfg)?;
    Ok(g.into_iter()
        .zip(&cfg.strengths)
        .map(|(v, k)| v / *k)
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub strengths: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<Vec2>>,
    pub hamiltonian: Vec<f64>,
    pub min_sep: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&[Vec2]> {
        self.states.last().map(|s| s.as_slice())
    }

    /// max_i |K(t_i) − K(t_0)| / |K(t_0)|.
    pub fn hamiltonian_drift(&self) -> f64 {
        let k0 = self.hamiltonian[0];
        let scale = k0.abs().max(f64::MIN_POSITIVE);
        self.hamiltonian
            .iter()
            .map(|k| (k - k0).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Σ κ_j |ξ_j − c|² at each sample.
    pub fn angular_momentum(&self, center: Vec2) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| {
                s.iter()
                    .zip(&self.strengths)
                    .map(|(p, k)| k * (*p - center).norm_sq())
                    .sum()
            })
            .collect()
    }

    /// Linear interpolation of vortex `j` at time `t`.
    pub fn position_at(&self, j: usize, t: f64) -> Vec2 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.states[0][j];
        }
        if t >= self.times[n - 1] {
            return self.states[n - 1][j];
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let a = (t - t0) / (t1 - t0);
        self.states[i][j] * (1.0 - a) + self.states[i + 1][j] * a
    }

    /// CSV with header `t,xi_1x,xi_1y,...,K,min_sep`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let n = self.strengths.len();
        let mut header = String::from("t");
        for j in 1..=n {
            header.push_str(&format!(",xi_{j}x,xi_{j}y"));
        }
        header.push_str(",K,min_sep");
        writeln!(w, "{header}")?;
        for i in 0..self.len() {
            let mut row = format!("{}", self.times[i]);
            for p in &self.states[i] {
                row.push_str(&format!(",{},{}", p.x, p.y));
            }
            row.push_str(&format!(",{},{}", self.hamiltonian[i], self.min_sep[i]));
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Separation diagnostic of one state: min pairwise distance for N ≥ 2,
/// boundary clearance for N = 1.
fn separation(domain: &DomainModel, cfg: &VortexConfiguration) -> f64 {
    if cfg.len() >= 2 {
        cfg.min_pairwise()
    } else {
        domain.boundary_distance(cfg.positions[0])
    }
}

fn guard(domain: &DomainModel, cfg: &VortexConfiguration, t: f64) -> Result<()> {
    let tol = GUARD * domain.diameter();
    for (j, p) in cfg.positions.iter().enumerate() {
        let d = domain.boundary_distance(*p);
        if !(d >= tol) {
            return Err(Error::Boundary {
                time: t,
                detail: format!("vortex {} at distance {d:e} from the boundary", j + 1),
            });
        }
    }
    let d = cfg.min_pairwise();
    if d < tol {
        return Err(Error::Collision {
            time: Some(t),
            detail: format!("min pairwise distance {d:e}"),
        });
    }
    Ok(())
}

fn with_positions(cfg: &VortexConfiguration, base: &[Vec2], k: &[Vec2], s: f64) -> VortexConfiguration {
    VortexConfiguration {
        positions: base.iter().zip(k).map(|(p, v)| *p + *v * s).collect(),
        strengths: cfg.strengths.clone(),
    }
}

/// Classic fixed-step RK4 from t = 0 to `t_end`; the last step is shortened
/// if `t_end` is not a multiple of `dt`.
pub fn integrate(
    domain: &DomainModel,
    cfg: &VortexConfiguration,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && t_end > 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("need dt > 0 and T > 0 (dt = {dt}, T = {t_end})")));
    }
    if cfg.strengths.iter().all(|&k| k == 0.0) {
        return Err(Error::DegenerateStrength("all strengths vanish".into()));
    }
    cfg.validate(domain)?;
    guard(domain, cfg, 0.0)?;
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut traj = Trajectory {
        strengths: cfg.strengths.clone(),
        times: vec![0.0],
        states: vec![cfg.positions.clone()],
        hamiltonian: vec![kirchhoff_routh(domain, cfg)?],
        min_sep: vec![separation(domain, cfg)],
    };
    let mut state = cfg.clone();
    let mut t = 0.0;
    let stage = |c: &VortexConfiguration, t: f64| -> Result<Vec<Vec2>> {
        vortex_rhs(domain, c).map_err(|e| match e {
            Error::Collision { detail, .. } => Error::Collision { time: Some(t), detail },
            Error::Domain(detail) => Error::Boundary { time: t, detail },
            other => other,
        })
    };
    for n in 0..steps {
        let h = if n + 1 == steps { t_end - t } else { dt };
        let x = state.positions.clone();
        let k1 = stage(&state, t)?;
        let k2 = stage(&with_positions(&state, &x, &k1, 0.5 * h), t + 0.5 * h)?;
        let k3 = stage(&with_positions(&state, &x, &k2, 0.5 * h), t + 0.5 * h)?;
        let k4 = stage(&with_positions(&state, &x, &k3, h), t + h)?;
        for j in 0..x.len() {
            state.positions[j] = x[j] + (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (h / 6.0);
        }
        t = if n + 1 == steps { t_end } else { (n + 1) as f64 * dt };
        guard(domain, &state, t)?;
        traj.times.push(t);
        traj.states.push(state.positions.clone());
        traj.hamiltonian.push(kirchhoff_routh(domain, &state)?);
        traj.min_sep.push(separation(domain, &state));
    }
    Ok(traj)
}

/// Minimum over the stored samples of the separation diagnostic.
pub fn min_separation(traj: &Trajectory) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::InvalidInput("empty trajectory".into()));
    }
    Ok(traj.min_sep.iter().copied().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(r: f64) -> VortexConfiguration {
        VortexConfiguration::single(Vec2::new(r, 0.0), 1.0)
    }

    #[test]
    fn rhs_examples() {
        let d = DomainModel::unit_disk();
        let v0 = vortex_rhs(&d, &VortexConfiguration::single(Vec2::ZERO, 1.0)).unwrap();
        assert_eq!(v0[0], Vec2::ZERO);
        let v = vortex_rhs(&d, &single(0.5)).unwrap()[0];
        assert!((v.norm() - 8.0 / 3.0).abs() < 1e-13);
        assert!(v.x.abs() < 1e-15 && v.y > 0.0, "counterclockwise tangential");
    }

    #[test]
    fn negating_strengths_reverses_velocities() {
        let d = DomainModel::unit_disk();
        let cfg = VortexConfiguration::new(
            vec![Vec2::new(0.2, 0.1), Vec2::new(-0.3, 0.3)],
            vec![1.0, -2.0],
        )
        .unwrap();
        let mut neg = cfg.clone();
        neg.strengths.iter_mut().for_each(|k| *k = -*k);
        let a = vortex_rhs(&d, &cfg).unwrap();
        let b = vortex_rhs(&d, &neg).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(*u, -*v);
        }
    }

    #[test]
    fn zero_strength_rejected() {
        let d = DomainModel::unit_disk();
        let cfg = VortexConfiguration::new(vec![Vec2::new(0.2, 0.0)], vec![0.0]).unwrap();
        assert!(matches!(vortex_rhs(&d, &cfg), Err(Error::DegenerateStrength(_))));
        assert!(matches!(integrate(&d, &cfg, 1.0, 0.1), Err(Error::DegenerateStrength(_))));
    }

    #[test]
    fn circular_orbit() {
        let d = DomainModel::unit_disk();
        let traj = integrate(&d, &single(0.5), 1.0, 1e-3).unwrap();
        let end = traj.last().unwrap()[0];
        assert!((end.norm() - 0.5).abs() < 1e-8);
        let mut angle = end.angle();
        let expect = 16.0 / 3.0;
        while angle < expect - std::f64::consts::PI {
            angle += 2.0 * std::f64::consts::PI;
        }
        assert!((angle - expect).abs() < 1e-6, "angle {angle}");
        assert!((min_separation(&traj).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn fourth_order_self_convergence() {
        let d = DomainModel::unit_disk();
        let cfg = VortexConfiguration::new(
            vec![Vec2::new(0.3, 0.0), Vec2::new(-0.2, 0.2)],
            vec![1.0, 1.0],
        )
        .unwrap();
        let end = |dt: f64| integrate(&d, &cfg, 0.5, dt).unwrap().last().unwrap().to_vec();
        let reference = end(0.005 / 8.0);
        let err = |dt: f64| {
            end(dt)
                .iter()
                .zip(&reference)
                .map(|(a, b)| (*a - *b).norm())
                .fold(0.0, f64::max)
        };
        let ratio = err(0.005) / err(0.0025);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn guards_report_failure_time() {
        // a tight opposite-sign pair runs into the wall and spreads along it
        // at a wall distance of about half its initial separation
        let d = DomainModel::unit_disk();
        let cfg = VortexConfiguration::new(
            vec![Vec2::new(0.0, 0.0012), Vec2::new(0.0, -0.0012)],
            vec![1.0, -1.0],
        )
        .unwrap();
        match integrate(&d, &cfg, 0.01, 1e-6) {
            Err(Error::Boundary { time, .. }) => assert!(time > 0.0 && time < 0.01),
            other => panic!("expected a boundary guard, got {:?}", other.map(|t| t.len())),
        }
        let close = VortexConfiguration::new(
            vec![Vec2::new(0.1, 0.0), Vec2::new(0.1015, 0.0)],
            vec![1.0, 1.0],
        )
        .unwrap();
        match integrate(&d, &close, 0.01, 1e-4) {
            Err(Error::Collision { time, .. }) => assert_eq!(time, Some(0.0)),
            other => panic!("expected a collision guard, got {:?}", other.map(|t| t.len())),
        }
    }

    #[test]
    fn csv_header() {
        let d = DomainModel::unit_disk();
        let traj = integrate(&d, &single(0.5), 0.01, 1e-3).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,xi_1x,xi_1y,K,min_sep\n"));
        assert_eq!(s.lines().count(), 12);
    }

    #[test]
    fn empty_trajectory_rejected() {
        let t = Trajectory {
            strengths: vec![],
            times: vec![],
            states: vec![],
            hamiltonian: vec![],
            min_sep: vec![],
        };
        assert!(min_separation(&t).is_err());
    }
}
