use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::data::{DataSpec, Manufactured};
use super::ConfigError;
use crate::integrators::{Method, ProblemData, SolverConfig};
use crate::mesh::{build_structured_mesh, msh::read_msh, Mesh, Point, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Structured {
        nx: usize,
        ny: usize,
        extent: [f64; 4],
        /// Uniform refinements applied after generation.
        #[serde(default)]
        refine: usize,
    },
    Msh {
        path: PathBuf,
        #[serde(default)]
        refine: usize,
    },
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec::Structured {
            nx: 8,
            ny: 8,
            extent: [0.0, 0.0, 1.0, 1.0],
            refine: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Triangle { vertices: [Point; 3] },
    /// Cells with this physical tag.
    Tag { tag: i32 },
}

impl Region {
    fn contains(&self, p: Point, tag: i32) -> bool {
        match self {
            Region::Rect { x0, y0, x1, y1 } => p[0] >= *x0 && p[0] <= *x1 && p[1] >= *y0 && p[1] <= *y1,
            Region::Triangle { vertices: [a, b, c] } => {
                let side = |u: Point, v: Point| (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]);
                let (s0, s1, s2) = (side(*a, *b), side(*b, *c), side(*c, *a));
                (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0)
            }
            Region::Tag { tag: t } => *t == tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRegion {
    #[serde(flatten)]
    pub region: Region,
    pub value: f64,
}

/// Piecewise constant coefficient, sampled at cell centroids; later
/// regions win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KappaSpec {
    pub default: f64,
    pub regions: Vec<KappaRegion>,
}

impl Default for KappaSpec {
    fn default() -> Self {
        Self {
            default: 1.0,
            regions: Vec::new(),
        }
    }
}

impl KappaSpec {
    pub fn is_constant(&self) -> bool {
        self.regions.iter().all(|r| r.value == self.default)
    }

    pub fn at(&self, p: Point, tag: i32) -> f64 {
        self.regions
            .iter()
            .rev()
            .find(|r| r.region.contains(p, tag))
            .map_or(self.default, |r| r.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    XMin,
    XMax,
    YMin,
    YMax,
}

/// Which boundary faces carry Dirichlet data; the rest are Neumann.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    #[default]
    All,
    None,
    Sides(Vec<Side>),
    Tags(Vec<i32>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub u0: DataSpec,
    pub v0: DataSpec,
    pub source: DataSpec,
    pub dirichlet: DataSpec,
    /// Standing-wave exact solution; replaces the four fields above.
    pub exact: Option<Manufactured>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    #[default]
    None,
    /// The exact solution from `data.exact`.
    Exact,
    /// Leapfrog on the mesh refined `levels` times, with the largest stable
    /// step (times `safety`) that divides the final time.
    RefinedLeapfrog {
        #[serde(default = "one")]
        levels: usize,
        #[serde(default = "default_safety")]
        safety: f64,
    },
    /// Crank-Nicolson on the same mesh with the step divided by `factor`.
    FineStep { factor: usize },
    /// Coefficients on the same mesh written by an earlier run.
    Stored { path: PathBuf },
}

fn one() -> usize {
    1
}

fn default_safety() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for artifacts; nothing is written when unset.
    pub dir: Option<PathBuf>,
    pub vtk: bool,
    pub coefficients: bool,
    pub diagnostics: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub mesh: MeshSpec,
    pub degree: usize,
    /// Penalty parameter; `4 (k + 1) (k + 2)` when unset.
    pub eta: Option<f64>,
    pub tau: f64,
    pub t_end: f64,
    pub method: Method,
    pub subdomains: usize,
    pub layers: usize,
    pub workers: usize,
    pub seed: u64,
    /// VTK snapshot cadence in steps; 0 writes only the final state.
    pub snapshot_every: usize,
    pub solver: SolverConfig,
    pub kappa: KappaSpec,
    pub dirichlet: BoundarySpec,
    pub data: DataConfig,
    pub reference: ReferenceSpec,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            mesh: MeshSpec::default(),
            degree: 1,
            eta: None,
            tau: 0.01,
            t_end: 1.0,
            method: Method::Cn,
            subdomains: 1,
            layers: 2,
            workers: 1,
            seed: 0,
            snapshot_every: 0,
            solver: SolverConfig::default(),
            kappa: KappaSpec::default(),
            dirichlet: BoundarySpec::All,
            data: DataConfig::default(),
            reference: ReferenceSpec::None,
            output: OutputConfig::default(),
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut config = Self::from_toml(&text)?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        if let MeshSpec::Msh { path, .. } = &mut config.mesh {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let ReferenceSpec::Stored { path } = &mut config.reference {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configurations serialize")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive, got {v}")))
            }
        };
        positive("tau", self.tau)?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", format!("must be nonnegative, got {}", self.t_end)));
        }
        if let Some(eta) = self.eta {
            positive("eta", eta)?;
        }
        if self.degree > 8 {
            return Err(invalid("degree", format!("at most 8 supported, got {}", self.degree)));
        }
        match &self.mesh {
            MeshSpec::Structured { nx, ny, extent, .. } => {
                if *nx == 0 || *ny == 0 {
                    return Err(invalid("mesh.nx", "grid dimensions must be positive"));
                }
                if !(extent[2] > extent[0] && extent[3] > extent[1]) {
                    return Err(invalid("mesh.extent", "expected [x0, y0, x1, y1] with x1 > x0 and y1 > y0"));
                }
            }
            MeshSpec::Msh { .. } => {}
        }
        if self.subdomains == 0 {
            return Err(invalid("subdomains", "must be at least 1"));
        }
        if self.method == Method::Ds && self.layers == 0 {
            return Err(invalid("layers", "the splitting method needs at least one overlap layer"));
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        positive("kappa.default", self.kappa.default)?;
        for r in &self.kappa.regions {
            positive("kappa.regions.value", r.value)?;
        }
        positive("solver.tol", self.solver.tol)?;
        if self.solver.maxit == 0 {
            return Err(invalid("solver.maxit", "must be at least 1"));
        }
        if let Some(m) = &self.data.exact {
            if !self.kappa.is_constant() {
                return Err(invalid("data.exact", "the standing-wave solution needs a constant kappa"));
            }
            if let Some(w) = m.omega {
                positive("data.exact.omega", w)?;
            }
        }
        match &self.reference {
            ReferenceSpec::Exact if self.data.exact.is_none() => {
                return Err(invalid("reference", "an exact reference needs data.exact"));
            }
            ReferenceSpec::RefinedLeapfrog { levels, safety } => {
                if *levels == 0 {
                    return Err(invalid("reference.levels", "must be at least 1"));
                }
                if !(*safety > 0.0 && *safety <= 1.0) {
                    return Err(invalid("reference.safety", "must lie in (0, 1]"));
                }
            }
            ReferenceSpec::FineStep { factor } if *factor < 2 => {
                return Err(invalid("reference.factor", "must be at least 2"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| crate::swip::default_eta(self.degree))
    }

    /// Builds the mesh with kappa and boundary labels applied.
    pub fn build_mesh(&self) -> Result<Mesh, ConfigError> {
        let (mut mesh, refine) = match &self.mesh {
            MeshSpec::Structured { nx, ny, extent, refine } => {
                let [x0, y0, x1, y1] = *extent;
                let m = build_structured_mesh(*nx, *ny, Rect::new(x0, y0, x1, y1))
                    .map_err(|e| invalid("mesh", e.to_string()))?;
                (m, *refine)
            }
            MeshSpec::Msh { path, refine } => (read_msh(path).map_err(|e| invalid("mesh.path", e.to_string()))?, *refine),
        };
        for _ in 0..refine {
            mesh = mesh.refine_uniform();
        }
        let kappa: Vec<f64> = (0..mesh.n_cells())
            .map(|c| self.kappa.at(mesh.centroid(c), mesh.cell_tag(c)))
            .collect();
        mesh.set_kappa(kappa).map_err(|e| invalid("kappa", e.to_string()))?;
        self.apply_boundary(&mut mesh);
        Ok(mesh)
    }

    fn apply_boundary(&self, mesh: &mut Mesh) {
        match &self.dirichlet {
            BoundarySpec::All => mesh.classify_boundary(|_| true),
            BoundarySpec::None => mesh.classify_boundary(|_| false),
            BoundarySpec::Tags(tags) => mesh.classify_boundary_by_tag(tags),
            BoundarySpec::Sides(sides) => {
                let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for v in mesh.vertices() {
                    for d in 0..2 {
                        lo[d] = lo[d].min(v[d]);
                        hi[d] = hi[d].max(v[d]);
                    }
                }
                let tol = 1e-9 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
                let sides = sides.clone();
                mesh.classify_boundary(move |p| {
                    sides.iter().any(|s| match s {
                        Side::XMin => (p[0] - lo[0]).abs() <= tol,
                        Side::XMax => (p[0] - hi[0]).abs() <= tol,
                        Side::YMin => (p[1] - lo[1]).abs() <= tol,
                        Side::YMax => (p[1] - hi[1]).abs() <= tol,
                    })
                });
            }
        }
    }

    /// The exact solution and its time derivative, if configured.
    pub fn exact(&self) -> Option<(DataSpec, DataSpec)> {
        self.data.exact.map(|m| {
            let u = m.solution(self.kappa.default);
            let v = u.time_derivative().expect("sinusoids differentiate");
            (u, v)
        })
    }

    pub fn problem_data(&self) -> ProblemData {
        let (u0, v0, source, dirichlet) = match (self.data.exact, self.exact()) {
            (Some(m), Some((u, v))) => (u, v, m.source(self.kappa.default), u),
            _ => (self.data.u0, self.data.v0, self.data.source, self.data.dirichlet),
        };
        ProblemData {
            u0: u0.at_time(0.0),
            v0: v0.at_time(0.0),
            source: source.space_time(),
            dirichlet: dirichlet.space_time(),
        }
    }
}

/// Standing wave `cos(sqrt(2) pi t) sin(pi x) sin(pi y)` on the unit square
/// with homogeneous Dirichlet conditions.
pub fn standing_wave(n: usize, degree: usize, method: Method, tau: f64, t_end: f64) -> RunConfig {
    RunConfig {
        name: "standing_wave".into(),
        mesh: MeshSpec::Structured {
            nx: n,
            ny: n,
            extent: [0.0, 0.0, 1.0, 1.0],
            refine: 0,
        },
        degree,
        tau,
        t_end,
        method,
        data: DataConfig {
            exact: Some(Manufactured {
                amplitude: 1.0,
                kx: 1.0,
                ky: 1.0,
                omega: None,
                phase: 0.0,
            }),
            ..DataConfig::default()
        },
        reference: ReferenceSpec::Exact,
        ..RunConfig::default()
    }
}

/// Corners of the triangular inclusion of [`prism`].
pub const PRISM_TRIANGLE: [Point; 3] = [[1.0, 1.0], [2.5, 2.0], [1.0, 3.0]];

/// Wave entering `[0, 8] x [0, 4]` through `x = 0` and crossing a
/// triangular inclusion with `kappa = 1` in a background `kappa = 1.5`.
pub fn prism(nx: usize, ny: usize, degree: usize, tau: f64, t_end: f64) -> RunConfig {
    RunConfig {
        name: "prism".into(),
        mesh: MeshSpec::Structured {
            nx,
            ny,
            extent: [0.0, 0.0, 8.0, 4.0],
            refine: 0,
        },
        degree,
        tau,
        t_end,
        method: Method::Ds,
        subdomains: 4,
        layers: 4,
        kappa: KappaSpec {
            default: 1.5,
            regions: vec![KappaRegion {
                region: Region::Triangle {
                    vertices: PRISM_TRIANGLE,
                },
                value: 1.0,
            }],
        },
        dirichlet: BoundarySpec::Sides(vec![Side::XMin]),
        data: DataConfig {
            dirichlet: DataSpec::WindowSine {
                amplitude: 1.0,
                omega: 0.0125,
            },
            ..DataConfig::default()
        },
        reference: ReferenceSpec::RefinedLeapfrog {
            levels: 1,
            safety: 0.9,
        },
        ..RunConfig::default()
    }
}

/// Desk-scale prism: 80 x 40 squares, `k = 2`, four subdomains,
/// `tau = 0.002` up to `T = 1`.
pub fn prism_desk() -> RunConfig {
    prism(80, 40, 2, 0.002, 1.0)
}
