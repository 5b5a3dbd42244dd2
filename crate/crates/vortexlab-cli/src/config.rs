use crate::{CliError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use vortexlab::{DomainModel, Shape, Vec2, VortexConfiguration};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    SimulateVortices,
    ConvergenceStudy,
    ModeSolve,
    CheckAnsatz,
    TransportProbe,
    GapTest,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::SimulateVortices => "simulate-vortices",
            CommandKind::ConvergenceStudy => "convergence-study",
            CommandKind::ModeSolve => "mode-solve",
            CommandKind::CheckAnsatz => "check-ansatz",
            CommandKind::TransportProbe => "transport-probe",
            CommandKind::GapTest => "gap-test",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    Disk,
    Square,
}

/// `kind = "disk"` is the closed-form disk; `kind = "grid"` a lattice
/// domain on `extent = [xmin, xmax, ymin, ymax]`, optionally masked to the
/// inscribed disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Grid {
        extent: [f64; 4],
        cells: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<MaskKind>,
    },
}

impl DomainSpec {
    pub fn shape(&self) -> Shape {
        match *self {
            DomainSpec::Disk { center, radius } => Shape::Disk {
                center: center.into(),
                radius,
            },
            DomainSpec::Grid { extent: [x0, x1, y0, y1], mask, .. } => match mask {
                Some(MaskKind::Disk) => Shape::Disk {
                    center: Vec2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
                    radius: 0.5 * (x1 - x0).min(y1 - y0),
                },
                _ => Shape::Rectangle {
                    min: Vec2::new(x0, y0),
                    max: Vec2::new(x1, y1),
                },
            },
        }
    }

    pub fn model(&self) -> Result<DomainModel> {
        let shape = self.shape();
        if !shape.is_valid() {
            return Err(CliError::key("domain", "degenerate extent or radius"));
        }
        Ok(match *self {
            DomainSpec::Disk { center, radius } => DomainModel::disk(center.into(), radius)?,
            DomainSpec::Grid { cells, .. } => {
                if cells < 8 {
                    return Err(CliError::key("domain.cells", "need at least 8 cells"));
                }
                DomainModel::grid(shape, cells)?
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VortexSpec {
    pub position: [f64; 2],
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerSpec {
    #[serde(default = "one")]
    pub cfl: f64,
    /// Lattice cells per ε when `resolution` is absent.
    #[serde(default = "eight")]
    pub cells_per_eps: f64,
    /// Radius of the energy ball around the first vortex.
    #[serde(default = "fifth")]
    pub energy_radius: f64,
    /// Centroid tracking window.
    #[serde(default = "tenth")]
    pub track_window: f64,
    #[serde(default)]
    pub bilinear: bool,
}

impl Default for EulerSpec {
    fn default() -> Self {
        EulerSpec {
            cfl: 1.0,
            cells_per_eps: 8.0,
            energy_radius: 0.2,
            track_window: 0.1,
            bilinear: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSource {
    /// g = (1+ρ)^{−α}, tagged with α.
    Decay,
    /// g built from p† = ρ^k e^{−ρ²/4}; the residual column is |p − p†|.
    Manufactured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: i32,
    #[serde(default = "four")]
    pub alpha: f64,
    #[serde(default = "hundred")]
    pub r: f64,
    #[serde(default = "nodes")]
    pub nodes: usize,
    pub source: ModeSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiDot {
    /// ξ̇ from the point-vortex system.
    Kirchhoff,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSpec {
    #[serde(default = "kirchhoff")]
    pub xi_dot: XiDot,
    /// Far probes keep |x − ξ_j| > far_delta.
    #[serde(default = "far_delta")]
    pub far_delta: f64,
    #[serde(default = "clearance")]
    pub clearance: f64,
    #[serde(default = "forty")]
    pub far_lattice: usize,
    /// Near probes sit at |y_j| ≤ near_y_max.
    #[serde(default = "three")]
    pub near_y_max: f64,
}

impl Default for AnsatzSpec {
    fn default() -> Self {
        AnsatzSpec {
            xi_dot: XiDot::Kirchhoff,
            far_delta: 0.4,
            clearance: 0.05,
            far_lattice: 40,
            near_y_max: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSpec {
    /// Inner horizon in original time.
    #[serde(default = "tenth")]
    pub horizon: f64,
    /// Random perturbation terms.
    #[serde(default = "three_terms")]
    pub terms: usize,
    /// Outer lattice for the Lᵖ check.
    #[serde(default = "sixty_four")]
    pub cells: usize,
    /// Support radius δ of the outer source.
    #[serde(default = "fifth")]
    pub delta: f64,
}

impl Default for TransportSpec {
    fn default() -> Self {
        TransportSpec {
            horizon: 0.1,
            terms: 3,
            cells: 64,
            delta: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSpec {
    #[serde(default = "radii")]
    pub radii: Vec<f64>,
    #[serde(default = "hundred_samples")]
    pub samples: usize,
    #[serde(default = "n_rad")]
    pub n_rad: usize,
    #[serde(default = "n_ang")]
    pub n_ang: usize,
    /// R for the spherical-harmonic check.
    #[serde(default = "harmonic_r")]
    pub harmonic_r: f64,
}

impl Default for GapSpec {
    fn default() -> Self {
        GapSpec {
            radii: radii(),
            samples: 100,
            n_rad: 3000,
            n_ang: 64,
            harmonic_r: 1e3,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn eight() -> f64 {
    8.0
}
fn fifth() -> f64 {
    0.2
}
fn tenth() -> f64 {
    0.1
}
fn four() -> f64 {
    4.0
}
fn three() -> f64 {
    3.0
}
fn hundred() -> f64 {
    100.0
}
fn nodes() -> usize {
    2000
}
fn kirchhoff() -> XiDot {
    XiDot::Kirchhoff
}
fn far_delta() -> f64 {
    0.4
}
fn clearance() -> f64 {
    0.05
}
fn forty() -> usize {
    40
}
fn three_terms() -> usize {
    3
}
fn sixty_four() -> usize {
    64
}
fn radii() -> Vec<f64> {
    vec![1e2, 1e3, 1e4]
}
fn hundred_samples() -> usize {
    100
}
fn n_rad() -> usize {
    3000
}
fn n_ang() -> usize {
    64
}
fn harmonic_r() -> f64 {
    1e3
}

/// One run. Sections irrelevant to `command` may be present and are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
    /// Lattice cells across the domain for grid-based commands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vortices: Vec<VortexSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler: Option<EulerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ansatz: Option<AnsatzSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport: Option<TransportSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapSpec>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("config: {}", e.message().trim())).with_span(e.span(), text))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Checks every value the command will touch.
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = &self.domain {
            d.model()?;
        }
        for (i, v) in self.vortices.iter().enumerate() {
            if !(v.position.iter().all(|c| c.is_finite()) && v.strength.is_finite()) {
                return Err(CliError::key(&format!("vortices[{i}]"), "non-finite value"));
            }
            if v.strength == 0.0 {
                return Err(CliError::key(&format!("vortices[{i}].strength"), "must be nonzero"));
            }
        }
        if self.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(CliError::key("eps", "values must be positive"));
        }
        for (key, v) in [("t_end", self.t_end), ("dt", self.dt)] {
            if v.is_some_and(|x| !(x > 0.0 && x.is_finite())) {
                return Err(CliError::key(key, "must be positive"));
            }
        }
        if let (Some(t), Some(dt)) = (self.t_end, self.dt) {
            if dt > t {
                return Err(CliError::key("dt", "exceeds t_end"));
            }
        }
        match self.command {
            CommandKind::SimulateVortices => {
                self.require_domain()?;
                self.vortex_config()?;
                self.require("t_end", self.t_end)?;
                self.require("dt", self.dt)?;
            }
            CommandKind::ConvergenceStudy => {
                self.require_domain()?;
                let cfg = self.vortex_config()?;
                self.require("t_end", self.t_end)?;
                if self.eps.len() < 3 {
                    return Err(CliError::key("eps", "convergence study needs at least 3 values"));
                }
                if self.eps.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(CliError::key("eps", "values must be strictly descending"));
                }
                if cfg.len() != 1 {
                    return Err(CliError::key("vortices", "convergence study tracks exactly one vortex"));
                }
                let e = self.euler.clone().unwrap_or_default();
                if !(e.cfl > 0.0 && e.cfl <= 1.0) {
                    return Err(CliError::key("euler.cfl", "must lie in (0, 1]"));
                }
                if !(e.cells_per_eps >= 8.0) {
                    return Err(CliError::key("euler.cells_per_eps", "resolution policy needs h ≤ ε/8"));
                }
                if !(e.energy_radius > 0.0 && e.track_window > 0.0) {
                    return Err(CliError::key("euler", "energy_radius and track_window must be positive"));
                }
                for &ep in &self.eps {
                    self.euler_cells(ep)?;
                }
            }
            CommandKind::ModeSolve => {
                let m = self.mode.as_ref().ok_or_else(|| CliError::key("mode", "missing section"))?;
                if m.k == 0 {
                    return Err(CliError::key("mode.k", "k = 0 has no solution operator (the mean must vanish)"));
                }
                if !(m.r > 1.0 && m.r.is_finite()) {
                    return Err(CliError::key("mode.r", "must exceed 1"));
                }
                if m.nodes < 50 {
                    return Err(CliError::key("mode.nodes", "need at least 50 nodes"));
                }
                if !(m.alpha > 3.0 && m.alpha <= 5.0) {
                    return Err(CliError::key("mode.alpha", "must lie in (3, 5]"));
                }
            }
            CommandKind::CheckAnsatz => {
                self.require_domain()?;
                self.vortex_config()?;
                if self.eps.len() < 2 {
                    return Err(CliError::key("eps", "fitting a power needs at least 2 values"));
                }
                let a = self.ansatz.clone().unwrap_or_default();
                if !(a.far_delta > 0.0 && a.clearance >= 0.0 && a.near_y_max > 0.0 && a.far_lattice >= 2) {
                    return Err(CliError::key("ansatz", "probe parameters must be positive"));
                }
            }
            CommandKind::TransportProbe => {
                let domain = self.require_domain()?;
                if !matches!(domain, DomainSpec::Disk { .. }) {
                    return Err(CliError::key("domain.kind", "transport probe needs the closed-form disk"));
                }
                let cfg = self.vortex_config()?;
                if cfg.len() != 1 {
                    return Err(CliError::key("vortices", "transport probe uses exactly one vortex"));
                }
                if self.eps.len() < 2 {
                    return Err(CliError::key("eps", "fitting a slope needs at least 2 values"));
                }
                let t = self.transport.clone().unwrap_or_default();
                if !(t.horizon > 0.0 && t.delta > 0.0 && t.cells >= 8 && t.terms >= 1) {
                    return Err(CliError::key("transport", "parameters must be positive"));
                }
            }
            CommandKind::GapTest => {
                let g = self.gap.clone().unwrap_or_default();
                if g.radii.is_empty() || g.radii.iter().chain([&g.harmonic_r]).any(|r| !(*r > 1.0 && r.is_finite())) {
                    return Err(CliError::key("gap.radii", "need radii > 1"));
                }
                if g.n_rad < 100 || g.n_ang < 8 {
                    return Err(CliError::key("gap", "need n_rad ≥ 100 and n_ang ≥ 8"));
                }
            }
        }
        Ok(())
    }

    fn require<T: Copy>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| CliError::key(key, format!("required by {}", self.command.name())))
    }

    pub fn require_domain(&self) -> Result<&DomainSpec> {
        self.domain
            .as_ref()
            .ok_or_else(|| CliError::key("domain", format!("required by {}", self.command.name())))
    }

    /// Vortices validated against the domain.
    pub fn vortex_config(&self) -> Result<VortexConfiguration> {
        if self.vortices.is_empty() {
            return Err(CliError::key("vortices", "empty vortex list"));
        }
        let domain = self.require_domain()?.model()?;
        for (i, v) in self.vortices.iter().enumerate() {
            if !domain.contains(v.position.into()) {
                return Err(CliError::key(&format!("vortices[{i}].position"), "outside the domain"));
            }
        }
        Ok(VortexConfiguration::new(
            self.vortices.iter().map(|v| v.position.into()).collect(),
            self.vortices.iter().map(|v| v.strength).collect(),
        )?)
    }

    /// Euler lattice cells for one ε, enforcing h ≤ ε/8.
    pub fn euler_cells(&self, eps: f64) -> Result<usize> {
        let shape = self.require_domain()?.shape();
        let (lo, hi) = shape.bounding_box();
        let width = (hi.x - lo.x).max(hi.y - lo.y);
        let cells = match self.resolution {
            Some(n) => n,
            None => {
                let e = self.euler.clone().unwrap_or_default();
                (width * e.cells_per_eps / eps).ceil() as usize
            }
        };
        let h = width / cells as f64;
        if h > eps / 8.0 * (1.0 + 1e-12) {
            return Err(CliError::key(
                "resolution",
                format!("h = {h} exceeds ε/8 = {} (resolution policy)", eps / 8.0),
            ));
        }
        Ok(cells)
    }
}

impl CliError {
    fn with_span(self, span: Option<std::ops::Range<usize>>, text: &str) -> Self {
        match (self, span) {
            (CliError::Invalid(msg), Some(s)) => {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                CliError::Invalid(format!("{msg} (line {line})"))
            }
            (e, _) => e,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMPLE: &str = r#"
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
    fn parses_and_validates() {
        let c = RunConfig::parse(SIMPLE).unwrap();
        c.validate().unwrap();
        assert_eq!(c.vortices.len(), 1);
        assert_eq!(c.domain, Some(DomainSpec::Disk { center: [0.0, 0.0], radius: 1.0 }));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let e = RunConfig::parse(&SIMPLE.replace("dt = 0.001", "dt = 0.001\ndtt = 2")).unwrap_err();
        assert!(e.to_string().contains("dtt"), "{e}");
        let e = RunConfig::parse(&SIMPLE.replace("radius = 1.0", "radius = 1.0\nradus = 2")).unwrap_err();
        assert!(e.to_string().contains("radus"), "{e}");
    }

    #[test]
    fn empty_vortex_list_names_the_key() {
        let text = SIMPLE.split("[[vortices]]").next().unwrap();
        let e = RunConfig::parse(text).unwrap().validate().unwrap_err();
        assert!(e.to_string().contains("vortices"), "{e}");
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::parse(SIMPLE).unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn resolution_policy() {
        let mut c = RunConfig::parse(SIMPLE).unwrap();
        c.command = CommandKind::ConvergenceStudy;
        c.eps = vec![0.1, 0.05, 0.025];
        assert_eq!(c.euler_cells(0.025).unwrap(), 640);
        c.resolution = Some(400);
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("resolution"), "{e}");
    }

    #[test]
    fn grid_mask_shapes() {
        let d = DomainSpec::Grid {
            extent: [-1.0, 1.0, -0.5, 0.5],
            cells: 32,
            mask: Some(MaskKind::Disk),
        };
        assert_eq!(d.shape(), Shape::Disk { center: Vec2::ZERO, radius: 0.5 });
        let d = DomainSpec::Grid {
            extent: [0.0, 1.0, 0.0, 1.0],
            cells: 32,
            mask: None,
        };
        assert!(matches!(d.shape(), Shape::Rectangle { .. }));
    }
}
