use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use super::config::{MeshSpec, ReferenceSpec, RunConfig};
use super::norms::{
    combined_distance, l2_distance, l2_distance_exact, l2_distance_refined, project_refined, ratio,
    CombinedDistance,
};
use super::ConfigError;
use crate::dg::BrokenSpace;
use crate::error::Result;
use crate::integrators::{self, leapfrog_tau_max, time_grid, Discretization, Method, State};
use crate::io::{format_coefficients_csv, parse_coefficients_csv, write_vtk, VtkField};
use crate::mesh::{build_layout, partition_cells, Mesh};
use crate::splitting::{assemble_global, diagnostics_csv, ds_init, ds_step, SplitConfig, StepDiagnostics};

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub meshing: f64,
    pub setup: f64,
    pub per_step: f64,
    pub total: f64,
}

/// Errors of one run at the final time.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub name: String,
    pub method: Method,
    pub degree: usize,
    pub n_cells: usize,
    pub h_min: f64,
    pub tau: f64,
    pub steps: usize,
    pub subdomains: usize,
    pub layers: usize,
    /// `|u - u_ref|_L2 / |u_ref|_L2`.
    pub rel_l2_u: Option<f64>,
    /// Relative distance in `|.|_a x |.|_L2`.
    pub rel_combined: Option<f64>,
    pub reference: String,
    pub timings: Timings,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str =
        "name,method,degree,cells,h_min,tau,steps,subdomains,layers,rel_l2_u,rel_combined,reference,meshing_s,setup_s,per_step_s,total_s";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |x| format!("{x:e}"));
        format!(
            "{},{},{},{},{:e},{:e},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
            self.name,
            method_name(self.method),
            self.degree,
            self.n_cells,
            self.h_min,
            self.tau,
            self.steps,
            self.subdomains,
            self.layers,
            opt(self.rel_l2_u),
            opt(self.rel_combined),
            self.reference,
            self.timings.meshing,
            self.timings.setup,
            self.timings.per_step,
            self.timings.total,
        )
    }
}

pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::Cn => "cn",
        Method::Lf => "lf",
        Method::Ds => "ds",
    }
}

/// Mesh and space of a configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub space: Arc<BrokenSpace>,
    pub meshing_seconds: f64,
}

impl Prepared {
    pub fn mesh(&self) -> &Mesh {
        self.space.mesh()
    }
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let start = Instant::now();
    let mesh = config.build_mesh()?;
    let space = Arc::new(BrokenSpace::new(Arc::new(mesh), config.degree));
    Ok(Prepared {
        space,
        meshing_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Final state and by-products of one time integration.
#[derive(Debug, Clone)]
pub struct Solution {
    pub state: State,
    pub snapshots: Vec<State>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub solver_iterations: Vec<usize>,
    pub setup_seconds: f64,
    pub step_seconds: f64,
}

/// Runs `config.method` on the prepared space.
pub fn solve(config: &RunConfig, prepared: &Prepared) -> Result<Solution> {
    let data = config.problem_data();
    let space = prepared.space.clone();
    let snapshot = (config.snapshot_every > 0).then_some(config.snapshot_every);
    if config.method != Method::Ds {
        let setup = Instant::now();
        let disc = Discretization::global(space, config.eta())?;
        let assembly = setup.elapsed().as_secs_f64();
        let out = integrators::run(&disc, &data, config.method, config.tau, config.t_end, config.solver, snapshot)?;
        return Ok(Solution {
            state: out.state,
            snapshots: out.snapshots,
            diagnostics: Vec::new(),
            solver_iterations: out.solver_iterations,
            setup_seconds: assembly + out.setup_seconds,
            step_seconds: out.step_seconds,
        });
    }
    let (tau, steps) = time_grid(config.tau, config.t_end)?;
    let setup = Instant::now();
    let mesh = space.mesh();
    let owner = partition_cells(mesh, config.subdomains, config.seed)?;
    let layout = Arc::new(build_layout(mesh, &owner, config.layers)?);
    let mut split_config = SplitConfig::new(config.eta(), tau);
    split_config.solver = config.solver;
    split_config.workers = config.workers;
    let mut split = ds_init(space, layout, &data, split_config)?;
    let setup_seconds = setup.elapsed().as_secs_f64();
    let stepping = Instant::now();
    let mut snapshots = Vec::new();
    let mut diagnostics = Vec::with_capacity(steps);
    for _ in 0..steps {
        if snapshot.is_some_and(|k| split.step % k == 0) {
            snapshots.push(assemble_global(&split));
        }
        diagnostics.push(ds_step(&mut split, &data)?);
    }
    let state = assemble_global(&split);
    if snapshot.is_some_and(|k| state.step % k == 0) {
        snapshots.push(state.clone());
    }
    Ok(Solution {
        solver_iterations: diagnostics.iter().map(|d| d.iterations.iter().sum()).collect(),
        state,
        snapshots,
        diagnostics,
        setup_seconds,
        step_seconds: stepping.elapsed().as_secs_f64(),
    })
}

/// A reference solution at the final time.
#[derive(Debug, Clone)]
pub enum Reference {
    /// Coefficients in the candidate space.
    Same { u: Vec<f64>, v: Vec<f64>, label: String },
    /// Coefficients on the candidate mesh refined `levels` times.
    Refined {
        space: Arc<BrokenSpace>,
        levels: usize,
        u: Vec<f64>,
        v: Vec<f64>,
        label: String,
    },
    /// The analytic solution of the configuration at time `t`.
    Exact { config: Box<RunConfig>, t: f64 },
}

impl Reference {
    pub fn label(&self) -> String {
        match self {
            Reference::Same { label, .. } | Reference::Refined { label, .. } => label.clone(),
            Reference::Exact { .. } => "exact".into(),
        }
    }
}

/// Computes the reference configured in `config.reference` for the
/// prepared space; `None` when no reference is configured.
pub fn compute_reference(config: &RunConfig, prepared: &Prepared) -> Result<Option<Reference>> {
    let (tau, _) = time_grid(config.tau, config.t_end)?;
    Ok(Some(match &config.reference {
        ReferenceSpec::None => return Ok(None),
        ReferenceSpec::Exact => Reference::Exact {
            config: Box::new(config.clone()),
            t: config.t_end,
        },
        ReferenceSpec::FineStep { factor } => {
            let fine = RunConfig {
                method: Method::Cn,
                tau: tau / *factor as f64,
                snapshot_every: 0,
                ..config.clone()
            };
            let s = solve(&fine, prepared)?;
            Reference::Same {
                u: s.state.u,
                v: s.state.v,
                label: format!("cn(tau/{factor})"),
            }
        }
        ReferenceSpec::Stored { path } => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.clone(),
                source: e,
            })?;
            let (u, v) = parse_coefficients_csv(&text).map_err(|m| ConfigError::Invalid {
                field: "reference.path".into(),
                message: m,
            })?;
            if u.len() != prepared.space.n_dofs() {
                return Err(ConfigError::Invalid {
                    field: "reference.path".into(),
                    message: format!("{} coefficients stored, the space has {}", u.len(), prepared.space.n_dofs()),
                }
                .into());
            }
            Reference::Same {
                u,
                v,
                label: format!("stored({})", path.display()),
            }
        }
        ReferenceSpec::RefinedLeapfrog { levels, safety } => {
            let mut mesh = prepared.mesh().clone();
            for _ in 0..*levels {
                mesh = mesh.refine_uniform();
            }
            let space = Arc::new(BrokenSpace::new(Arc::new(mesh), config.degree));
            let disc = Discretization::global(space.clone(), config.eta())?;
            let tau_ref = tau.min(safety * leapfrog_tau_max(&disc.op));
            let (tau_ref, steps) = time_grid(tau_ref, config.t_end)?;
            log::info!("leapfrog reference: {} cells, tau = {tau_ref:e}, {steps} steps", space.mesh().n_cells());
            let data = config.problem_data();
            let out = integrators::run(&disc, &data, Method::Lf, tau_ref, config.t_end, config.solver, None)?;
            Reference::Refined {
                space,
                levels: *levels,
                u: out.state.u,
                v: out.state.v,
                label: format!("lf(refined x{levels}, tau={tau_ref:e})"),
            }
        }
    }))
}

/// `(relative L2 error of u, relative combined error)` of a state against
/// a reference.
pub fn errors_against(
    config: &RunConfig,
    prepared: &Prepared,
    state: &State,
    reference: &Reference,
) -> Result<(f64, CombinedDistance)> {
    let space = &prepared.space;
    let disc = Discretization::global(space.clone(), config.eta())?;
    let (l2, u_ref, v_ref) = match reference {
        Reference::Same { u, v, .. } => {
            let (e, n) = l2_distance(space, &state.u, u);
            (ratio(e, n), u.clone(), v.clone())
        }
        Reference::Refined {
            space: fine,
            levels,
            u,
            v,
            ..
        } => {
            let (e, n) = l2_distance_refined(space, &state.u, fine, u, *levels);
            (
                ratio(e, n),
                project_refined(space, fine, u, *levels),
                project_refined(space, fine, v, *levels),
            )
        }
        Reference::Exact { config: exact_config, t } => {
            let (u, v) = exact_config.exact().ok_or_else(|| ConfigError::Invalid {
                field: "reference".into(),
                message: "an exact reference needs data.exact".into(),
            })?;
            let t = *t;
            let (e, n) = l2_distance_exact(space, &state.u, &|x| u.eval(x, t));
            (
                ratio(e, n),
                space.project(&|x| u.eval(x, t)).into_vec(),
                space.project(&|x| v.eval(x, t)).into_vec(),
            )
        }
    };
    let combined = combined_distance(&disc.op, &state.u, &state.v, &u_ref, &v_ref)?;
    Ok((l2, combined))
}

/// Report, final state and written files of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: ErrorReport,
    pub space: Arc<BrokenSpace>,
    pub solution: Solution,
    pub artifacts: Vec<PathBuf>,
}

/// Builds the mesh, runs the configured method, evaluates the configured
/// reference at the final time and writes the requested artifacts.
pub fn run_experiment(config: &RunConfig) -> Result<Experiment> {
    let start = Instant::now();
    let prepared = prepare(config)?;
    let solution = solve(config, &prepared)?;
    let reference = compute_reference(config, &prepared)?;
    let errors = reference
        .as_ref()
        .map(|r| errors_against(config, &prepared, &solution.state, r))
        .transpose()?;
    let steps = solution.state.step;
    let report = ErrorReport {
        name: config.name.clone(),
        method: config.method,
        degree: config.degree,
        n_cells: prepared.mesh().n_cells(),
        h_min: prepared.mesh().h_min(),
        tau: solution.state.tau,
        steps,
        subdomains: if config.method == Method::Ds { config.subdomains } else { 1 },
        layers: if config.method == Method::Ds { config.layers } else { 0 },
        rel_l2_u: errors.map(|e| e.0),
        rel_combined: errors.map(|e| e.1.combined),
        reference: reference.as_ref().map_or("none".into(), Reference::label),
        timings: Timings {
            meshing: prepared.meshing_seconds,
            setup: solution.setup_seconds,
            per_step: if steps > 0 { solution.step_seconds / steps as f64 } else { 0.0 },
            total: start.elapsed().as_secs_f64(),
        },
    };
    let artifacts = write_artifacts(config, &prepared.space, &solution, &report)?;
    Ok(Experiment {
        report,
        space: prepared.space,
        solution,
        artifacts,
    })
}

fn write_artifacts(
    config: &RunConfig,
    space: &BrokenSpace,
    solution: &Solution,
    report: &ErrorReport,
) -> Result<Vec<PathBuf>> {
    let Some(dir) = &config.output.dir else {
        return Ok(Vec::new());
    };
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let name = &config.name;
    if config.output.vtk {
        let mut states: Vec<&State> = solution.snapshots.iter().collect();
        if states.last().is_none_or(|s| s.step != solution.state.step) {
            states.push(&solution.state);
        }
        for s in states {
            let path = dir.join(format!("{name}_{:06}.vtk", s.step));
            let title = format!("{name} t={:e}", s.time());
            write_vtk(
                &path,
                space,
                &title,
                &[
                    VtkField { name: "u", coeffs: &s.u },
                    VtkField { name: "v", coeffs: &s.v },
                ],
            )?;
            written.push(path);
        }
    }
    if config.output.coefficients {
        let path = dir.join(format!("{name}_coefficients.csv"));
        std::fs::write(&path, format_coefficients_csv(space, &solution.state.u, &solution.state.v))?;
        written.push(path);
    }
    if config.output.diagnostics && !solution.diagnostics.is_empty() {
        let path = dir.join(format!("{name}_diagnostics.csv"));
        std::fs::write(&path, diagnostics_csv(&solution.diagnostics))?;
        written.push(path);
    }
    let path = dir.join(format!("{name}_report.csv"));
    std::fs::write(&path, format!("{}\n{}\n", ErrorReport::CSV_HEADER, report.csv_row()))?;
    written.push(path);
    Ok(written)
}

/// Difference between the splitting method and global Crank-Nicolson on
/// the same mesh and time grid.
#[derive(Debug, Clone)]
pub struct CnComparison {
    pub layers: usize,
    pub subdomains: usize,
    /// Relative `|u_DS - u_CN|_a`, `|v_DS - v_CN|_L2` and combined.
    pub distance: CombinedDistance,
    pub rel_l2_u: f64,
    pub ds: Solution,
    pub cn: Solution,
}

/// Runs the splitting method and Crank-Nicolson on the same space.
pub fn compare_to_cn(config: &RunConfig) -> Result<CnComparison> {
    let prepared = prepare(config)?;
    let cn = solve(&RunConfig { method: Method::Cn, ..config.clone() }, &prepared)?;
    compare_with(config, &prepared, cn)
}

/// [`compare_to_cn`] for several overlap widths, sharing one CN run.
pub fn compare_layers(config: &RunConfig, layers: &[usize]) -> Result<Vec<CnComparison>> {
    let prepared = prepare(config)?;
    let cn = solve(&RunConfig { method: Method::Cn, ..config.clone() }, &prepared)?;
    layers
        .iter()
        .map(|&l| compare_with(&RunConfig { layers: l, ..config.clone() }, &prepared, cn.clone()))
        .collect()
}

fn compare_with(config: &RunConfig, prepared: &Prepared, cn: Solution) -> Result<CnComparison> {
    let ds = solve(&RunConfig { method: Method::Ds, ..config.clone() }, prepared)?;
    let disc = Discretization::global(prepared.space.clone(), config.eta())?;
    let distance = combined_distance(&disc.op, &ds.state.u, &ds.state.v, &cn.state.u, &cn.state.v)?;
    let (e, n) = l2_distance(&prepared.space, &ds.state.u, &cn.state.u);
    Ok(CnComparison {
        layers: config.layers,
        subdomains: config.subdomains,
        distance,
        rel_l2_u: ratio(e, n),
        ds,
        cn,
    })
}

pub fn comparison_table(rows: &[CnComparison]) -> String {
    let mut out = String::from("subdomains,layers,rel_u_a,rel_v_l2,rel_combined,rel_l2_u\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e}",
            r.subdomains, r.layers, r.distance.u_a, r.distance.v_l2, r.distance.combined, r.rel_l2_u
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// `tau, tau / 2, tau / 4, ...` on a fixed mesh.
    Tau,
    /// Uniformly refined meshes at a fixed step.
    Mesh,
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tau" => Ok(Sweep::Tau),
            "mesh" | "h" => Ok(Sweep::Mesh),
            _ => Err(format!("unknown sweep `{s}` (tau, mesh)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h_min: f64,
    pub tau: f64,
    pub rel_l2_u: f64,
    pub rel_combined: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
    pub order_combined: Option<f64>,
}

/// Errors over `levels` halvings of `tau` or `h`.
///
/// For a step sweep the reference is computed once with the finest step,
/// for a mesh sweep once per mesh.
pub fn converge(config: &RunConfig, sweep: Sweep, levels: usize) -> Result<Vec<ConvergenceRow>> {
    if config.reference == ReferenceSpec::None {
        return Err(ConfigError::Invalid {
            field: "reference".into(),
            message: "a convergence study needs a reference".into(),
        }
        .into());
    }
    let level_config = |i: usize| {
        let mut c = config.clone();
        match sweep {
            Sweep::Tau => c.tau = config.tau / (1u64 << i) as f64,
            Sweep::Mesh => match &mut c.mesh {
                MeshSpec::Structured { refine, .. } | MeshSpec::Msh { refine, .. } => *refine += i,
            },
        }
        c
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels);
    let shared = match sweep {
        Sweep::Tau => {
            let finest = level_config(levels.saturating_sub(1));
            let prepared = prepare(&finest)?;
            Some((compute_reference(&finest, &prepared)?.expect("reference configured"), prepared))
        }
        Sweep::Mesh => None,
    };
    for i in 0..levels {
        let c = level_config(i);
        let (prepared, reference) = match &shared {
            Some((r, p)) => (p.clone(), r.clone()),
            None => {
                let p = prepare(&c)?;
                let r = compute_reference(&c, &p)?.expect("reference configured");
                (p, r)
            }
        };
        let s = solve(&c, &prepared)?;
        let (l2, combined) = errors_against(&c, &prepared, &s.state, &reference)?;
        let order = |prev: f64, now: f64| (prev / now).log2();
        let last = rows.last();
        rows.push(ConvergenceRow {
            h_min: prepared.mesh().h_min(),
            tau: s.state.tau,
            rel_l2_u: l2,
            rel_combined: combined.combined,
            order: last.map(|r| order(r.rel_l2_u, l2)),
            order_combined: last.map(|r| order(r.rel_combined, combined.combined)),
        });
    }
    Ok(rows)
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("h_min,tau,rel_l2_u,order_l2,rel_combined,order_combined\n");
    let opt = |x: Option<f64>| x.map_or(String::new(), |x| format!("{x:.4}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{},{:e},{}",
            r.h_min,
            r.tau,
            r.rel_l2_u,
            opt(r.order),
            r.rel_combined,
            opt(r.order_combined)
        );
    }
    out
}
