//! The six subcommands. Each returns a short human-readable summary.

use crate::config::{CommandKind, ModeSource, RunConfig, XiDot};
use crate::output::{OutDir, PlotScript};
use crate::{CliError, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use vortexlab::domain_green::{kirchhoff_routh, DomainModel};
use vortexlab::euler2d::{bubble_vorticity, energy_in_ball, write_diagnostics_csv, EulerRun, EulerSolver};
use vortexlab::fit::{loglog_slope, relative_spread};
use vortexlab::lattice::Interpolation;
use vortexlab::liouville::{
    ansatz_residual, far_probes, gaussian_bumps, near_probes, quadratic_form_gap_with, zonal_harmonic_pullback,
    BubbleParams, Bump, KernelSet,
};
use vortexlab::modesolver::{decay_envelope, envelope_constant, mode_grid, mode_residual, solve_mode, ModeRHS};
use vortexlab::nvortex::{integrate, min_separation, vortex_rhs};
use vortexlab::par;
use vortexlab::polar::PolarGrid;
use vortexlab::transport::{
    inner_gain, outer_lp_check, support_propagation_check, DiskVortexStream, InnerAdvection, OuterAdvection,
    SmoothPerturbation, VortexPath,
};
use vortexlab::{Shape, Vec2, VortexConfiguration};

pub fn run(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    cfg.validate()?;
    let summary = match cfg.command {
        CommandKind::SimulateVortices => simulate_vortices(cfg, out)?,
        CommandKind::ConvergenceStudy => convergence_study(cfg, out)?,
        CommandKind::ModeSolve => mode_solve(cfg, out)?,
        CommandKind::CheckAnsatz => check_ansatz(cfg, out)?,
        CommandKind::TransportProbe => transport_probe(cfg, out)?,
        CommandKind::GapTest => gap_test(cfg, out)?,
    };
    out.manifest(cfg)?;
    Ok(summary)
}

fn shape_center(s: &Shape) -> Vec2 {
    match *s {
        Shape::Disk { center, .. } => center,
        Shape::Rectangle { min, max } => (min + max) * 0.5,
    }
}

fn slope_or_nan(xs: &[f64], ys: &[f64]) -> f64 {
    loglog_slope(xs, ys).unwrap_or(f64::NAN)
}

fn simulate_vortices(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let spec = cfg.require_domain()?;
    let domain = spec.model()?;
    let vc = cfg.vortex_config()?;
    let (t_end, dt) = (cfg.t_end.unwrap(), cfg.dt.unwrap());
    let traj = integrate(&domain, &vc, t_end, dt)?;
    let c = shape_center(&spec.shape());

    let mut w = out.csv("trajectory.csv")?;
    let mut header = vec!["t".to_string()];
    for j in 1..=vc.len() {
        header.extend([format!("x{j}"), format!("y{j}"), format!("r{j}")]);
    }
    header.extend(["K".into(), "min_sep".into()]);
    w.write_record(&header)?;
    for i in 0..traj.len() {
        let mut row = vec![traj.times[i].to_string()];
        for p in &traj.states[i] {
            row.extend([p.x.to_string(), p.y.to_string(), (*p - c).norm().to_string()]);
        }
        row.extend([traj.hamiltonian[i].to_string(), traj.min_sep[i].to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;

    let drift = traj.hamiltonian_drift();
    let sep = min_separation(&traj)?;
    let mut w = out.csv("summary.csv")?;
    w.write_record(["vortices", "steps", "t_end", "dt", "K0", "K_drift", "min_separation"])?;
    w.write_record([
        vc.len().to_string(),
        (traj.len() - 1).to_string(),
        t_end.to_string(),
        dt.to_string(),
        kirchhoff_routh(&domain, &vc)?.to_string(),
        drift.to_string(),
        sep.to_string(),
    ])?;
    w.flush()?;

    let mut plot = String::from("plot ");
    for j in 1..=vc.len() {
        if j > 1 {
            plot.push_str(", ");
        }
        plot.push_str(&format!("'trajectory.csv' using 'x{j}':'y{j}' with lines title 'vortex {j}'"));
    }
    PlotScript::new("point-vortex trajectories")
        .line("set size ratio -1")
        .panel("trajectories.png", &plot)
        .line("set size noratio")
        .line("set logscale y")
        .panel("separation.png", "plot 'trajectory.csv' using 't':'min_sep' with lines")
        .write(out)?;
    Ok(format!(
        "{} steps to t = {t_end}; relative K drift {drift:.3e}; min separation {sep:.4}",
        traj.len() - 1
    ))
}

struct EpsRow {
    eps: f64,
    cells: usize,
    h: f64,
    steps: usize,
    centroid_error: f64,
    energy_constant: f64,
}

fn convergence_study(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let spec = cfg.require_domain()?;
    let shape = spec.shape();
    let domain = spec.model()?;
    let vc = cfg.vortex_config()?;
    let e = cfg.euler.clone().unwrap_or_default();
    let t_end = cfg.t_end.unwrap();
    let dt = cfg.dt.unwrap_or((t_end / 1000.0).min(1e-4));
    let traj = integrate(&domain, &vc, t_end, dt)?;
    let (xi, kappa) = (vc.positions[0], vc.strengths[0]);
    let interp = if e.bilinear { Interpolation::Bilinear } else { Interpolation::Cubic };
    let cells: Vec<usize> = cfg.eps.iter().map(|&ep| cfg.euler_cells(ep)).collect::<Result<_>>()?;
    let indexed: Vec<(usize, f64)> = cfg.eps.iter().copied().enumerate().collect();

    let rows = par::map_slice(&indexed, |&(i, ep)| -> Result<EpsRow> {
        let solver = EulerSolver::new(shape, cells[i], interp)?;
        let omega0 = solver.sample(|p| bubble_vorticity(ep, &vc.positions, &vc.strengths, p));
        let psi0 = solver.poisson(&omega0)?;
        let energy = energy_in_ball(&psi0, &shape, xi, e.energy_radius)?;
        let run = EulerRun {
            omega0,
            shape,
            cfl: e.cfl,
            t_end,
            snapshot_every: t_end,
            interpolation: interp,
        };
        let (snaps, diags) = solver.evolve(&run, &[(xi, e.track_window)])?;
        let err = diags
            .iter()
            .map(|d| (d.centroids[0] - traj.position_at(0, d.t)).norm())
            .fold(0.0, f64::max);
        let mut buf = Vec::new();
        write_diagnostics_csv(&mut buf, &diags)?;
        out.write(&format!("diagnostics_eps{}.csv", i + 1), &buf)?;
        if let Some(last) = snaps.last() {
            let mut buf = Vec::new();
            vortexlab::io::write_field_binary(&mut buf, last)?;
            out.write(&format!("omega_eps{}.bin", i + 1), &buf)?;
        }
        Ok(EpsRow {
            eps: ep,
            cells: cells[i],
            h: solver.lattice().h,
            steps: diags.len() - 1,
            centroid_error: err,
            energy_constant: energy / (kappa * kappa * ep.ln().abs()),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.centroid_error).collect();
    let energies: Vec<f64> = rows.iter().map(|r| r.energy_constant).collect();
    let slope = slope_or_nan(&eps, &errs);
    let energy_slope = slope_or_nan(&eps, &energies);
    let mut w = out.csv("convergence.csv")?;
    w.write_record([
        "epsilon",
        "cells",
        "h",
        "steps",
        "centroid_error",
        "energy_constant",
        "centroid_slope",
        "energy_slope",
    ])?;
    for r in &rows {
        w.write_record([
            r.eps.to_string(),
            r.cells.to_string(),
            r.h.to_string(),
            r.steps.to_string(),
            r.centroid_error.to_string(),
            r.energy_constant.to_string(),
            slope.to_string(),
            energy_slope.to_string(),
        ])?;
    }
    w.flush()?;

    let mut centroids = String::from("plot ");
    for i in 1..=rows.len() {
        if i > 1 {
            centroids.push_str(", ");
        }
        centroids.push_str(&format!("'diagnostics_eps{i}.csv' using 'c1x':'c1y' with lines title 'eps {}'", eps[i - 1]));
    }
    PlotScript::new("Euler convergence study")
        .line("set logscale xy")
        .panel(
            "centroid_error.png",
            "plot 'convergence.csv' using 'epsilon':'centroid_error' with linespoints",
        )
        .line("unset logscale")
        .line("set logscale x")
        .panel(
            "energy_constant.png",
            "plot 'convergence.csv' using 'epsilon':'energy_constant' with linespoints",
        )
        .line("unset logscale")
        .line("set size ratio -1")
        .panel("centroids.png", &centroids)
        .write(out)?;
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    Ok(format!(
        "centroid errors {} (slope {slope:.3}, {}monotone); energy constants {energies:.4?}",
        errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "),
        if monotone { "" } else { "not " }
    ))
}

fn mode_solve(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let m = cfg.mode.clone().unwrap();
    let (k, alpha, r) = (m.k, m.alpha, m.r);
    let kf = k as f64;
    let grid = mode_grid(r, m.nodes)?;
    let exact = move |x: f64| x.powi(k.abs()) * (-x * x / 4.0).exp();
    let rhs = match m.source {
        ModeSource::Decay => ModeRHS::from_fn(k, grid.clone(), |x| Complex64::new((1.0 + x).powf(-alpha), 0.0), Some(alpha)),
        ModeSource::Manufactured => {
            let lp = move |x: f64| {
                let q = 1.0 + x * x;
                exact(x) * (-(kf.abs() + 1.0) + x * x / 4.0 + 8.0 / (q * q))
            };
            ModeRHS::from_fn(k, grid.clone(), |x| Complex64::new(0.0, 4.0 * kf * lp(x) / (1.0 + x * x)), None)
        }
    };
    let p = solve_mode(&rhs, r)?;
    let manufactured = m.source == ModeSource::Manufactured;

    let mut w = out.csv("profile.csv")?;
    let mut header = vec!["rho", "re_p", "im_p", "abs_p", "envelope_ratio"];
    if manufactured {
        header.push("residual");
    }
    w.write_record(&header)?;
    let mut worst = 0.0f64;
    for (rho, v) in grid.rho.iter().zip(&p.values) {
        let mut row = vec![
            rho.to_string(),
            v.re.to_string(),
            v.im.to_string(),
            v.norm().to_string(),
            (v.norm() / decay_envelope(*rho, alpha, r)).to_string(),
        ];
        if manufactured {
            let e = (v - exact(*rho)).norm();
            worst = worst.max(e);
            row.push(e.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;

    // both branches of the decay bound, with and without the log factor
    let plain = p
        .values
        .iter()
        .zip(&grid.rho)
        .map(|(v, x)| v.norm() / (1.0 + x).powf(4.0 - alpha))
        .fold(0.0, f64::max);
    let logged = p
        .values
        .iter()
        .zip(&grid.rho)
        .map(|(v, x)| v.norm() / ((1.0 + x).powf(4.0 - alpha) * (16.0 * r / (x + 1.0)).ln()))
        .fold(0.0, f64::max);
    let fitted = envelope_constant(&p, alpha, r);
    let ode = mode_residual(&p, &rhs);
    let mut w = out.csv("report.csv")?;
    w.write_record([
        "k",
        "alpha",
        "R",
        "nodes",
        "max_abs",
        "ode_residual",
        "envelope_constant",
        "constant_without_log",
        "constant_with_log",
        "max_residual",
    ])?;
    w.write_record([
        k.to_string(),
        alpha.to_string(),
        r.to_string(),
        m.nodes.to_string(),
        p.max_abs().to_string(),
        ode.to_string(),
        fitted.to_string(),
        plain.to_string(),
        logged.to_string(),
        if manufactured { worst.to_string() } else { String::new() },
    ])?;
    w.flush()?;

    PlotScript::new(&format!("mode k = {k}"))
        .line("set logscale x")
        .panel(
            "profile.png",
            "plot 'profile.csv' using 'rho':'re_p' with lines, '' using 'rho':'im_p' with lines",
        )
        .panel("envelope.png", "plot 'profile.csv' using 'rho':'envelope_ratio' with lines")
        .write(out)?;
    let mut s = format!("k = {k}: max |p| {:.4e}, ODE residual {ode:.2e}, envelope constant {fitted:.5}", p.max_abs());
    if manufactured {
        s.push_str(&format!(", max |p − p†| {worst:.2e}"));
    }
    Ok(s)
}

fn check_ansatz(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let domain = cfg.require_domain()?.model()?;
    let vc = cfg.vortex_config()?;
    let a = cfg.ansatz.clone().unwrap_or_default();
    let xidot = match a.xi_dot {
        XiDot::Kirchhoff => vortex_rhs(&domain, &vc)?,
        XiDot::Zero => vec![Vec2::ZERO; vc.len()],
    };
    let far = far_probes(&domain, &vc.positions, a.far_delta, a.clearance, a.far_lattice);
    if far.is_empty() {
        return Err(CliError::key("ansatz.far_delta", "no far-field probes left in the domain"));
    }
    let mut rows = Vec::new();
    for &ep in &cfg.eps {
        let p = BubbleParams::new(ep, vc.clone(), &domain)?;
        let near = near_probes(&p, a.near_y_max, 16, 16);
        if let Some((_, x)) = near.iter().find(|(_, x)| !domain.contains(*x)) {
            return Err(CliError::key(
                "ansatz.near_y_max",
                format!("probe ({}, {}) at ε = {ep} is outside Ω", x.x, x.y),
            ));
        }
        let far_max = par::map_slice(&far, |x| ansatz_residual(&p, &domain, &xidot, *x).map(f64::abs))
            .into_iter()
            .collect::<vortexlab::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let near_c = par::map_slice(&near, |(j, x)| {
            let y = (*x - vc.positions[*j]).norm() / ep;
            ansatz_residual(&p, &domain, &xidot, *x).map(|r| r.abs() * ep.powi(3) * (1.0 + y).powi(5))
        })
        .into_iter()
        .collect::<vortexlab::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
        rows.push((ep, far_max, near_c));
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let far_v: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let near_v: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let power = slope_or_nan(&eps, &far_v);
    let near_power = slope_or_nan(&eps, &near_v);
    let spread = relative_spread(&near_v);
    let mut w = out.csv("residuals.csv")?;
    w.write_record(["epsilon", "far_max", "near_constant", "far_power", "near_power", "near_spread"])?;
    for r in &rows {
        w.write_record([
            r.0.to_string(),
            r.1.to_string(),
            r.2.to_string(),
            power.to_string(),
            near_power.to_string(),
            spread.to_string(),
        ])?;
    }
    w.flush()?;
    PlotScript::new("ansatz residual")
        .line("set logscale xy")
        .panel(
            "residuals.png",
            "plot 'residuals.csv' using 'epsilon':'far_max' with linespoints, '' using 'epsilon':'near_constant' with linespoints",
        )
        .write(out)?;
    Ok(format!(
        "far-field power {power:.3}; near-field constants {near_v:.4?} (spread {:.1}%)",
        100.0 * spread
    ))
}

fn transport_probe(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let domain = cfg.require_domain()?.model()?;
    let vc = cfg.vortex_config()?;
    let tp = cfg.transport.clone().unwrap_or_default();
    let t = tp.horizon;
    let (c, a) = match domain {
        DomainModel::Disk { center, radius } => (center, radius),
        _ => unreachable!("validated"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let perturbations: Vec<SmoothPerturbation> = cfg
        .eps
        .iter()
        .map(|&ep| SmoothPerturbation::random(ep, tp.delta / ep, 1.0, tp.terms, &mut rng))
        .collect::<vortexlab::Result<_>>()?;
    let e = |y: Vec2, _t: f64| (-(y - Vec2::new(0.5, 0.0)).norm_sq()).exp();
    let pts: Vec<Vec2> = (0..6).map(|i| Vec2::polar(0.25 * i as f64, 0.3 * i as f64)).collect();
    let traj = Arc::new(integrate(&domain, &VortexConfiguration::single(vc.positions[0], vc.strengths[0]), t, 1e-4)?);
    let src_center = c + Vec2::new(-0.3, 0.2) * a;
    let src = move |x: Vec2, _t: f64| (-8.0 * ((x - src_center) / a).norm_sq()).exp();
    let delta = tp.delta;
    let tr = traj.clone();
    let outside = move |x: Vec2, t: f64| if (x - tr.position_at(0, t)).norm() > delta { 1.0 } else { 0.0 };

    let mut rows = Vec::new();
    for (ep, pert) in cfg.eps.iter().copied().zip(perturbations) {
        let adv = InnerAdvection::new(ep, t, tp.delta / ep, 1.0, Arc::new(pert))?;
        let gain = inner_gain(&adv, &e, &pts, &[0.5 * t, t], 0.0)?;
        let stream = DiskVortexStream::new(&domain, ep, vc.strengths.clone(), VortexPath::Trajectory(traj.clone()))?;
        let outer = OuterAdvection::new(domain.clone(), Arc::new(stream))?;
        let lp = outer_lp_check(&outer, &src, tp.cells, t, 4)?;
        let beta = support_propagation_check(&outer, &outside, delta, &[0.5 * t, t], 40, 24)?.beta;
        rows.push((ep, gain, lp.violation(), beta));
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let gains: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let betas: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let slope = slope_or_nan(&eps, &gains);
    let mut w = out.csv("transport.csv")?;
    w.write_record(["epsilon", "inner_gain", "lp_violation", "beta", "gain_slope", "beta_spread"])?;
    for r in &rows {
        w.write_record([
            r.0.to_string(),
            r.1.to_string(),
            r.2.to_string(),
            r.3.to_string(),
            slope.to_string(),
            relative_spread(&betas).to_string(),
        ])?;
    }
    w.flush()?;
    PlotScript::new("transport probes")
        .line("set logscale xy")
        .panel("inner_gain.png", "plot 'transport.csv' using 'epsilon':'inner_gain' with linespoints")
        .write(out)?;
    let lp_worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(format!("inner gain slope {slope:.3}; worst Lᵖ violation {lp_worst:.1e}; β = {betas:.3?}"))
}

fn gap_test(cfg: &RunConfig, out: &OutDir) -> Result<String> {
    let g = cfg.gap.clone().unwrap_or_default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut w = out.csv("harmonics.csv")?;
    w.write_record(["l", "R", "ratio", "expected", "error"])?;
    let r0 = g.harmonic_r;
    let grid = PolarGrid::new(1e-6, 8.0 * r0, g.n_rad, g.n_ang)?;
    let kernels = KernelSet::new(r0)?;
    let basis = kernels.basis(grid.clone())?;
    let mut harmonic = 0.0f64;
    for l in [2usize, 3] {
        let gap = quadratic_form_gap_with(&zonal_harmonic_pullback(grid.clone(), l), &kernels, &basis)?;
        let expected = 1.0 - 2.0 / (l * (l + 1)) as f64;
        let measured = gap.value / gap.weighted_norm;
        harmonic = harmonic.max((measured - expected).abs());
        w.write_record([
            l.to_string(),
            r0.to_string(),
            measured.to_string(),
            expected.to_string(),
            (measured - expected).abs().to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = out.csv("gap.csv")?;
    w.write_record(["R", "sample", "bumps", "ratio", "value", "weighted_norm"])?;
    let mut worst = f64::INFINITY;
    for &r in &g.radii {
        let grid = PolarGrid::new(1e-6, 8.0 * r, g.n_rad, g.n_ang)?;
        let kernels = KernelSet::new(r)?;
        let basis = kernels.basis(grid.clone())?;
        // draw sequentially so the samples do not depend on the thread count
        let draws: Vec<Vec<Bump>> = (0..g.samples)
            .map(|_| {
                let n = rng.random_range(1..=4);
                (0..n)
                    .map(|_| Bump {
                        center: Vec2::polar(3.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>()),
                        width: rng.random_range(0.3..2.0),
                        amplitude: rng.random_range(-1.0..1.0),
                    })
                    .collect()
            })
            .collect();
        let gaps = par::map_slice(&draws, |bumps| {
            let phi = basis.project(&gaussian_bumps(grid.clone(), bumps));
            quadratic_form_gap_with(&phi, &kernels, &basis)
        });
        for (i, (gap, bumps)) in gaps.into_iter().zip(&draws).enumerate() {
            let gap = gap?;
            worst = worst.min(gap.ratio);
            w.write_record([
                r.to_string(),
                i.to_string(),
                bumps.len().to_string(),
                gap.ratio.to_string(),
                gap.value.to_string(),
                gap.weighted_norm.to_string(),
            ])?;
        }
    }
    w.flush()?;
    PlotScript::new("quadratic-form gap")
        .line("set logscale x")
        .panel("gap.png", "plot 'gap.csv' using 'R':'ratio' with points")
        .write(out)?;
    Ok(format!(
        "harmonic ratio error {harmonic:.1e}; {} samples, min |log R|-scaled ratio {worst:.4}",
        g.samples * g.radii.len()
    ))
}
