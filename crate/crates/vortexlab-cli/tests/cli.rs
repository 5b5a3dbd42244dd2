use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn run(sub: &str, config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{sub}.toml"));
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_vortexlab"))
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .args(extra)
        .output()
        .unwrap()
}

fn run_out(sub: &str, config: &str, tmp: &TempDir, name: &str) -> (Output, PathBuf) {
    let out = tmp.path().join(name);
    let o = run(sub, config, tmp.path(), &["--out", out.to_str().unwrap()]);
    (o, out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Columns of a CSV by header name.
fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

const SINGLE: &str = r#"
command = "simulate-vortices"
t_end = 1.0
dt = 0.001

[domain]
kind = "disk"
radius = 1.0

[[vortices]]
position = [0.5, 0.0]
strength = 1.0
"#;

#[test]
fn single_vortex_keeps_radius_and_writes_manifest() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = run_out("simulate-vortices", SINGLE, &tmp, "single");
    assert!(o.status.success(), "{}", stderr(&o));
    let r = column(&out.join("trajectory.csv"), "r1");
    assert_eq!(r.len(), 1001);
    assert!(r.iter().all(|v| (v - 0.5).abs() < 1e-8));
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains(&format!("version = \"{}\"", env!("CARGO_PKG_VERSION"))));
    assert!(manifest.contains("[config.domain]"));
    assert!(manifest.contains("trajectory.csv"));
    assert!(std::fs::read_to_string(out.join("plot.gp")).unwrap().contains("trajectory.csv"));
    let drift = column(&out.join("summary.csv"), "K_drift");
    assert!(drift[0] < 1e-10);
}

#[test]
fn colliding_pair_exits_with_guard_code() {
    let tmp = TempDir::new().unwrap();
    let cfg = SINGLE.to_string() + "\n[[vortices]]\nposition = [0.5, 0.0001]\nstrength = 1.0\n";
    let (o, _) = run_out("simulate-vortices", &cfg, &tmp, "pair");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("collision at t = 0"), "{}", stderr(&o));
    // an opposite-sign pair this close runs into the wall
    let cfg = SINGLE.to_string() + "\n[[vortices]]\nposition = [0.5, 0.01]\nstrength = -1.0\n";
    let (o, _) = run_out("simulate-vortices", &cfg, &tmp, "dipole");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t = "), "{}", stderr(&o));
}

#[test]
fn invalid_configs_exit_one_naming_the_key() {
    let tmp = TempDir::new().unwrap();
    let empty = SINGLE.split("[[vortices]]").next().unwrap();
    let (o, _) = run_out("simulate-vortices", empty, &tmp, "a");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("vortices"), "{}", stderr(&o));

    let (o, _) = run_out("simulate-vortices", &SINGLE.replace("dt = 0.001", "dtt = 0.001"), &tmp, "b");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dtt"), "{}", stderr(&o));

    let (o, _) = run_out("simulate-vortices", &SINGLE.replace("[0.5, 0.0]", "[1.5, 0.0]"), &tmp, "c");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("vortices[0].position"), "{}", stderr(&o));

    let (o, _) = run_out("mode-solve", SINGLE, &tmp, "d");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("command"), "{}", stderr(&o));

    let o = run("simulate-vortices", SINGLE, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("out"), "{}", stderr(&o));
}

const CONVERGENCE: &str = r#"
command = "convergence-study"
eps = [0.1, 0.07, 0.05]
t_end = 0.01
dt = 1e-5

[domain]
kind = "disk"
radius = 0.4

[[vortices]]
position = [0.15, 0.0]
strength = 1.0
"#;

#[test]
fn convergence_study_is_monotone_and_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = run_out("convergence-study", CONVERGENCE, &tmp, "a");
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = out.join("convergence.csv");
    let errs = column(&csv, "centroid_error");
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    let slope = column(&csv, "centroid_slope");
    assert!(slope[0] >= 1.0, "{slope:?}");
    assert_eq!(column(&csv, "cells"), vec![64.0, 92.0, 128.0]);
    for i in 1..=3 {
        assert!(out.join(format!("diagnostics_eps{i}.csv")).exists());
        assert!(out.join(format!("omega_eps{i}.bin")).exists());
    }
    let (o, again) = run_out("convergence-study", CONVERGENCE, &tmp, "b");
    assert!(o.status.success());
    for f in ["convergence.csv", "diagnostics_eps2.csv", "omega_eps3.bin"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn convergence_study_validation() {
    let tmp = TempDir::new().unwrap();
    let (o, _) = run_out("convergence-study", &CONVERGENCE.replace("[0.1, 0.07, 0.05]", "[0.05]"), &tmp, "a");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eps"), "{}", stderr(&o));
    let (o, _) = run_out("convergence-study", &CONVERGENCE.replace("[0.1, 0.07, 0.05]", "[0.05, 0.07, 0.1]"), &tmp, "b");
    assert_eq!(o.status.code(), Some(1));
    // 100 cells over 0.8 gives h = 0.008 > 0.05/8
    let (o, _) = run_out("convergence-study", &CONVERGENCE.replace("dt = 1e-5", "dt = 1e-5\nresolution = 100"), &tmp, "c");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("resolution"), "{}", stderr(&o));
}

fn mode(k: i32, source: &str) -> String {
    format!("command = \"mode-solve\"\n[mode]\nk = {k}\nr = 100.0\nnodes = 2000\nsource = \"{source}\"\n")
}

#[test]
fn mode_solve_recovers_manufactured_profile() {
    let tmp = TempDir::new().unwrap();
    for k in [1, 2, 3, 4] {
        let (o, out) = run_out("mode-solve", &mode(k, "manufactured"), &tmp, &format!("k{k}"));
        assert!(o.status.success(), "{}", stderr(&o));
        let res = column(&out.join("profile.csv"), "residual");
        assert!(res.iter().cloned().fold(0.0, f64::max) < 1e-6, "k = {k}");
    }
}

#[test]
fn mode_solve_rejects_unsolvable_inputs() {
    let tmp = TempDir::new().unwrap();
    let (o, _) = run_out("mode-solve", &mode(1, "decay"), &tmp, "a");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("solvability"), "{}", stderr(&o));
    let (o, _) = run_out("mode-solve", &mode(0, "decay"), &tmp, "b");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mode.k"), "{}", stderr(&o));
}

#[test]
fn mode_solve_reports_envelope_branches() {
    let tmp = TempDir::new().unwrap();
    let cfg = mode(3, "decay").replace("nodes", "alpha = 5.0\nnodes");
    let (o, out) = run_out("mode-solve", &cfg, &tmp, "a");
    assert!(o.status.success(), "{}", stderr(&o));
    let report = out.join("report.csv");
    let fitted = column(&report, "envelope_constant")[0];
    assert_eq!(fitted, column(&report, "constant_with_log")[0]);
    assert!(column(&report, "constant_without_log")[0] > fitted);
}

const ANSATZ: &str = r#"
command = "check-ansatz"
eps = [0.1, 0.05, 0.025]

[domain]
kind = "disk"
radius = 1.0

[[vortices]]
position = [0.3, 0.0]
strength = 1.0

[[vortices]]
position = [-0.3, 0.1]
strength = 0.7
"#;

#[test]
fn ansatz_residual_scaling() {
    let tmp = TempDir::new().unwrap();
    let (o, out) = run_out("check-ansatz", ANSATZ, &tmp, "a");
    assert!(o.status.success(), "{}", stderr(&o));
    let power = column(&out.join("residuals.csv"), "far_power")[0];
    assert!((power - 2.0).abs() <= 0.2, "{power}");
    let cfg = ANSATZ.to_string() + "\n[ansatz]\nxi_dot = \"zero\"\n";
    let (o, out) = run_out("check-ansatz", &cfg, &tmp, "b");
    assert!(o.status.success(), "{}", stderr(&o));
    let spread = column(&out.join("residuals.csv"), "near_spread")[0];
    assert!(spread <= 0.2, "{spread}");
}

#[test]
fn ansatz_validation() {
    let tmp = TempDir::new().unwrap();
    let (o, _) = run_out("check-ansatz", &ANSATZ.replace("[0.1, 0.05, 0.025]", "[0.1]"), &tmp, "a");
    assert_eq!(o.status.code(), Some(1));
    let cfg = ANSATZ.to_string() + "\n[ansatz]\nnear_y_max = 10.0\n";
    let (o, _) = run_out("check-ansatz", &cfg, &tmp, "b");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("outside"), "{}", stderr(&o));
}

#[test]
fn transport_probe_gain_slope() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"
command = "transport-probe"
eps = [0.1, 0.05]
seed = 3

[domain]
kind = "disk"
radius = 1.0

[[vortices]]
position = [0.3, 0.1]
strength = 1.0

[transport]
cells = 32
"#;
    let (o, out) = run_out("transport-probe", cfg, &tmp, "a");
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = out.join("transport.csv");
    assert!((column(&csv, "gain_slope")[0] + 2.0).abs() < 0.1);
    assert!(column(&csv, "beta").iter().all(|b| *b > 0.0));
    assert!(column(&csv, "lp_violation").iter().all(|v| *v < 1e-4));
}

#[test]
fn gap_test_is_seeded() {
    let tmp = TempDir::new().unwrap();
    let cfg = "command = \"gap-test\"\nseed = 1\n[gap]\nradii = [100.0]\nsamples = 6\nn_rad = 1500\n";
    let (o, a) = run_out("gap-test", cfg, &tmp, "a");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(column(&a.join("gap.csv"), "ratio").iter().all(|r| *r > 0.0));
    let (_, b) = run_out("gap-test", cfg, &tmp, "b");
    assert_eq!(std::fs::read(a.join("gap.csv")).unwrap(), std::fs::read(b.join("gap.csv")).unwrap());
    let o = run("gap-test", cfg, tmp.path(), &["--out", tmp.path().join("c").to_str().unwrap(), "--seed", "2"]);
    assert!(o.status.success());
    assert_ne!(std::fs::read(a.join("gap.csv")).unwrap(), std::fs::read(tmp.path().join("c/gap.csv")).unwrap());
    let manifest = std::fs::read_to_string(tmp.path().join("c/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 2"));
}
