//! Crank-Nicolson and leapfrog time stepping for the semi-discrete system
//! `u' = v`, `v' = -L_h u + f_h + M^{-1} G(g)` on a cell set.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dg::{BrokenSpace, DgError};
use crate::linalg::{
    build_preconditioner, cg_solve, LinalgError, Preconditioner, PreconditionerKind, SolverReport,
    SparseSymMatrix,
};
use crate::mesh::{CellSet, Point};
use crate::swip::{add_boundary_term, assemble_swip, dirichlet_faces_of, SwipError, SwipOperator};

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("solution norm {norm:e} at step {step} exceeds the growth limit (unstable time step?)")]
    Instability { step: usize, norm: f64 },
    #[error("time step {tau:e} exceeds the leapfrog stability limit {tau_max:e}")]
    CflViolation { tau: f64, tau_max: f64 },
    #[error("linear solver failed: {0}")]
    Solver(#[from] LinalgError),
    #[error("linear solver did not converge at step {step}: {iterations} iterations, residual {residual:e}")]
    NotConverged { step: usize, iterations: usize, residual: f64 },
    #[error(transparent)]
    Swip(#[from] SwipError),
    #[error(transparent)]
    Dg(#[from] DgError),
    #[error("invalid time grid: {0}")]
    TimeGrid(String),
}

pub type SpaceFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// Initial values, source and Dirichlet data. `None` stands for zero.
#[derive(Clone, Default)]
pub struct ProblemData {
    pub u0: Option<SpaceFn>,
    pub v0: Option<SpaceFn>,
    pub source: Option<SpaceTimeFn>,
    pub dirichlet: Option<SpaceTimeFn>,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("u0", &self.u0.is_some())
            .field("v0", &self.v0.is_some())
            .field("source", &self.source.is_some())
            .field("dirichlet", &self.dirichlet.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub maxit: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            maxit: 10_000,
            preconditioner: PreconditionerKind::Ic0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cn,
    Lf,
    Ds,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cn" => Ok(Self::Cn),
            "lf" => Ok(Self::Lf),
            "ds" => Ok(Self::Ds),
            _ => Err(format!("unknown method `{s}` (cn, lf, ds)")),
        }
    }
}

/// Displacement and velocity coefficients on a cell set at `t = step * tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub step: usize,
    pub tau: f64,
}

impl State {
    pub fn time(&self) -> f64 {
        self.step as f64 * self.tau
    }

    pub fn zeros(n: usize, tau: f64) -> Self {
        Self {
            u: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            tau,
        }
    }
}

/// SWIP operator on a cell set together with the Dirichlet faces whose
/// data enter the right-hand side.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub space: Arc<BrokenSpace>,
    pub op: SwipOperator,
    pub dirichlet: Vec<usize>,
}

impl Discretization {
    /// Operator on the whole mesh with its Dirichlet faces penalized.
    pub fn global(space: Arc<BrokenSpace>, eta: f64) -> Result<Self, SwipError> {
        let cells = CellSet::all(space.mesh().n_cells());
        Self::on_cells(space, &cells, &[], eta)
    }

    /// Operator on `cells`; Dirichlet faces of the set are penalized, and so
    /// are the extra one-sided faces in `interface`.
    pub fn on_cells(space: Arc<BrokenSpace>, cells: &CellSet, interface: &[usize], eta: f64) -> Result<Self, SwipError> {
        let dirichlet = dirichlet_faces_of(space.mesh(), cells);
        let mut penalized = dirichlet.clone();
        penalized.extend_from_slice(interface);
        let op = assemble_swip(&space, cells, &penalized, eta)?;
        Ok(Self { space, op, dirichlet })
    }

    pub fn cells(&self) -> &CellSet {
        self.op.cells()
    }

    pub fn n_dofs(&self) -> usize {
        self.op.n_dofs()
    }

    /// Projected source `f_h(t)`.
    pub fn source(&self, data: &ProblemData, t: f64) -> Vec<f64> {
        match &data.source {
            Some(f) => self.space.project_on(self.cells(), &|x| f(x, t)),
            None => vec![0.0; self.n_dofs()],
        }
    }

    /// Weak Dirichlet term `G_D(g(t))`.
    pub fn dirichlet_load(&self, data: &ProblemData, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        if let Some(g) = &data.dirichlet {
            add_boundary_term(&self.space, self.cells(), &self.dirichlet, self.op.eta(), &|_, x| g(x, t), &mut out)
                .expect("Dirichlet faces lie on the boundary of the cell set");
        }
        out
    }

    /// Projected initial values.
    pub fn initial_state(&self, data: &ProblemData, tau: f64) -> State {
        let project = |f: &Option<SpaceFn>| match f {
            Some(f) => self.space.project_on(self.cells(), &|x| f(x)),
            None => vec![0.0; self.n_dofs()],
        };
        State {
            u: project(&data.u0),
            v: project(&data.v0),
            step: 0,
            tau,
        }
    }

    /// `|v|_M^2 + a(u, u)`.
    pub fn energy(&self, state: &State) -> f64 {
        let m = self.op.mass();
        let kinetic: f64 = state.v.iter().zip(m).map(|(v, m)| m * v * v).sum();
        kinetic + self.op.form(&state.u, &state.u).expect("state matches operator")
    }

    /// Leapfrog energy `|(u1 - u0) / tau|_M^2 + a(u0, u1)`.
    pub fn shifted_energy(&self, u0: &[f64], u1: &[f64], tau: f64) -> f64 {
        let m = self.op.mass();
        let kinetic: f64 = (0..u0.len())
            .map(|i| {
                let d = (u1[i] - u0[i]) / tau;
                m[i] * d * d
            })
            .sum();
        kinetic + self.op.form(u0, u1).expect("state matches operator")
    }
}

/// Crank-Nicolson system `M + tau^2 / 4 A` with its preconditioner.
pub struct CnSystem {
    pub tau: f64,
    pub matrix: SparseSymMatrix,
    pub precond: Box<dyn Preconditioner>,
    pub solver: SolverConfig,
}

impl std::fmt::Debug for CnSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CnSystem")
            .field("tau", &self.tau)
            .field("n", &self.matrix.n())
            .field("solver", &self.solver)
            .finish()
    }
}

impl CnSystem {
    pub fn new(disc: &Discretization, tau: f64, solver: SolverConfig) -> Result<Self, LinalgError> {
        let matrix = disc.op.matrix().scale_add_diag(0.25 * tau * tau, disc.op.mass());
        let precond = build_preconditioner(solver.preconditioner, &matrix, disc.space.dofs_per_cell())?;
        Ok(Self {
            tau,
            matrix,
            precond,
            solver,
        })
    }
}

/// One Crank-Nicolson step with the time-dependent data already evaluated.
///
/// `f_sum = f_h^{n+1} + f_h^n` and `g_sum` is the sum of the weak data terms
/// at both time levels. Solves
/// `(M + tau^2/4 A) u' = M u + tau M v - tau^2/4 A u + tau^2/4 (M f_sum + g_sum)`
/// and sets `v' = 2 (u' - u) / tau - v`.
pub fn cn_advance(
    disc: &Discretization,
    sys: &CnSystem,
    state: &State,
    f_sum: &[f64],
    g_sum: &[f64],
) -> Result<(State, SolverReport), IntegratorError> {
    let tau = sys.tau;
    let q = 0.25 * tau * tau;
    let m = disc.op.mass();
    let au = disc.op.apply_a(&state.u)?;
    let rhs: Vec<f64> = (0..m.len())
        .map(|i| m[i] * state.u[i] + tau * m[i] * state.v[i] - q * au[i] + q * m[i] * f_sum[i] + q * g_sum[i])
        .collect();
    let mut u = state.u.clone();
    let report = cg_solve(&sys.matrix, &rhs, &mut u, sys.solver.tol, sys.solver.maxit, sys.precond.as_ref())?;
    if !report.converged {
        return Err(IntegratorError::NotConverged {
            step: state.step + 1,
            iterations: report.iterations,
            residual: report.residual,
        });
    }
    let v = (0..m.len())
        .map(|i| 2.0 / tau * (u[i] - state.u[i]) - state.v[i])
        .collect();
    Ok((
        State {
            u,
            v,
            step: state.step + 1,
            tau,
        },
        report,
    ))
}

/// Global Crank-Nicolson step.
pub fn cn_step(
    disc: &Discretization,
    sys: &CnSystem,
    data: &ProblemData,
    state: &State,
) -> Result<(State, SolverReport), IntegratorError> {
    let (t0, t1) = (state.time(), (state.step + 1) as f64 * state.tau);
    let f_sum = add(&disc.source(data, t1), &disc.source(data, t0));
    let g_sum = add(&disc.dirichlet_load(data, t1), &disc.dirichlet_load(data, t0));
    cn_advance(disc, sys, state, &f_sum, &g_sum)
}

/// `v - h L_h u + h f + h M^{-1} g`, the leapfrog half step.
pub fn lf_half(op: &SwipOperator, u: &[f64], v: &[f64], f: &[f64], g: &[f64], h: f64) -> Result<Vec<f64>, SwipError> {
    let lu = op.apply_lh(u)?;
    let m = op.mass();
    Ok((0..v.len()).map(|i| v[i] - h * lu[i] + h * f[i] + h * (g[i] / m[i])).collect())
}

/// Global leapfrog step.
pub fn lf_step(disc: &Discretization, data: &ProblemData, state: &State) -> Result<State, IntegratorError> {
    let tau = state.tau;
    let (t0, t1) = (state.time(), (state.step + 1) as f64 * tau);
    let half = lf_half(
        &disc.op,
        &state.u,
        &state.v,
        &disc.source(data, t0),
        &disc.dirichlet_load(data, t0),
        0.5 * tau,
    )?;
    let u: Vec<f64> = state.u.iter().zip(&half).map(|(u, v)| u + tau * v).collect();
    let v = lf_half(&disc.op, &u, &half, &disc.source(data, t1), &disc.dirichlet_load(data, t1), 0.5 * tau)?;
    Ok(State {
        u,
        v,
        step: state.step + 1,
        tau,
    })
}

/// Largest eigenvalue of `M^{-1} A` by 20 power iterations.
pub fn estimate_lambda_max(op: &SwipOperator) -> f64 {
    let n = op.n_dofs();
    if n == 0 {
        return 0.0;
    }
    let m = op.mass();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract()).collect();
    let mut lambda = 0.0;
    for _ in 0..20 {
        let y = op.apply_lh(&x).expect("vector matches operator");
        let ax: f64 = x.iter().zip(&y).zip(m).map(|((a, b), m)| a * b * m).sum();
        let mx: f64 = x.iter().zip(m).map(|(a, m)| a * a * m).sum();
        lambda = ax / mx;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x = y.into_iter().map(|v| v / norm).collect();
    }
    lambda
}

/// Leapfrog stability bound `0.95 * 2 / sqrt(lambda_max)`.
pub fn leapfrog_tau_max(op: &SwipOperator) -> f64 {
    let lambda = estimate_lambda_max(op);
    if lambda <= 0.0 {
        f64::INFINITY
    } else {
        0.95 * 2.0 / lambda.sqrt()
    }
}

/// Returns `(tau', n)` with `n tau' = t_end`, `tau' <= tau`.
pub fn time_grid(tau: f64, t_end: f64) -> Result<(f64, usize), IntegratorError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(IntegratorError::TimeGrid(format!("time step must be positive, got {tau}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(IntegratorError::TimeGrid(format!("final time must be nonnegative, got {t_end}")));
    }
    let ratio = t_end / tau;
    let n = ratio.round();
    if (ratio - n).abs() <= 1e-9 * ratio.max(1.0) {
        return Ok((tau, n as usize));
    }
    let n = ratio.ceil() as usize;
    let adjusted = t_end / n as f64;
    log::warn!("time step {tau} does not divide T = {t_end}; using {adjusted} ({n} steps)");
    Ok((adjusted, n))
}

/// Result of a time integration run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: State,
    pub snapshots: Vec<State>,
    pub setup_seconds: f64,
    pub step_seconds: f64,
    pub solver_iterations: Vec<usize>,
}

/// Integrates from the projected initial data to `t_end`.
///
/// Snapshots are taken every `snapshot_every` steps (and at step 0) when
/// set. Leapfrog runs check the stability bound first.
pub fn run(
    disc: &Discretization,
    data: &ProblemData,
    method: Method,
    tau: f64,
    t_end: f64,
    solver: SolverConfig,
    snapshot_every: Option<usize>,
) -> Result<RunOutput, IntegratorError> {
    let (tau, steps) = time_grid(tau, t_end)?;
    let setup = Instant::now();
    let sys = match method {
        Method::Cn | Method::Ds => Some(CnSystem::new(disc, tau, solver)?),
        Method::Lf => {
            let tau_max = leapfrog_tau_max(&disc.op);
            if tau > tau_max {
                return Err(IntegratorError::CflViolation { tau, tau_max });
            }
            None
        }
    };
    let setup_seconds = setup.elapsed().as_secs_f64();
    let mut state = disc.initial_state(data, tau);
    let mut snapshots = Vec::new();
    let mut solver_iterations = Vec::new();
    let guard = GrowthGuard::new(&state);
    let stepping = Instant::now();
    for _ in 0..steps {
        if snapshot_every.is_some_and(|k| k > 0 && state.step % k == 0) {
            snapshots.push(state.clone());
        }
        state = match &sys {
            Some(sys) => {
                let (s, rep) = cn_step(disc, sys, data, &state)?;
                solver_iterations.push(rep.iterations);
                s
            }
            None => lf_step(disc, data, &state)?,
        };
        guard.check(&state)?;
    }
    if snapshot_every.is_some_and(|k| k > 0 && state.step % k == 0) {
        snapshots.push(state.clone());
    }
    Ok(RunOutput {
        state,
        snapshots,
        setup_seconds,
        step_seconds: stepping.elapsed().as_secs_f64(),
        solver_iterations,
    })
}

/// Flags runs whose coefficient norm grows beyond `1e6` times the initial
/// norm (or `1e6` for zero initial data).
#[derive(Debug, Clone, Copy)]
pub struct GrowthGuard {
    limit: f64,
}

impl GrowthGuard {
    pub fn new(state: &State) -> Self {
        Self::from_norm(coefficient_norm(state))
    }

    pub fn from_norm(norm: f64) -> Self {
        Self {
            limit: 1e6 * norm.max(1.0),
        }
    }

    pub fn check(&self, state: &State) -> Result<(), IntegratorError> {
        let norm = coefficient_norm(state);
        if !(norm <= self.limit) {
            return Err(IntegratorError::Instability { step: state.step, norm });
        }
        Ok(())
    }
}

fn coefficient_norm(state: &State) -> f64 {
    state.u.iter().chain(&state.v).map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};
    use std::f64::consts::PI;

    fn disc(nx: usize, k: usize) -> Discretization {
        let mut m = build_structured_mesh(nx, nx, Rect::unit()).unwrap();
        m.classify_boundary(|_| true);
        let s = Arc::new(BrokenSpace::new(Arc::new(m), k));
        Discretization::global(s, crate::swip::default_eta(k)).unwrap()
    }

    fn mode() -> ProblemData {
        ProblemData {
            u0: Some(Arc::new(|p: Point| (PI * p[0]).sin() * (PI * p[1]).sin())),
            ..Default::default()
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let d = disc(3, 1);
        let data = ProblemData::default();
        let sys = CnSystem::new(&d, 0.1, SolverConfig::default()).unwrap();
        let s0 = d.initial_state(&data, 0.1);
        let (s1, _) = cn_step(&d, &sys, &data, &s0).unwrap();
        assert!(s1.u.iter().chain(&s1.v).all(|&x| x == 0.0));
        let s2 = lf_step(&d, &data, &s0).unwrap();
        assert!(s2.u.iter().chain(&s2.v).all(|&x| x == 0.0));
        assert_eq!(s2.step, 1);
    }

    #[test]
    fn leapfrog_one_step_identity() {
        let d = disc(3, 2);
        let data = ProblemData {
            v0: Some(Arc::new(|p: Point| p[0] - p[1])),
            ..mode()
        };
        let tau = 0.01;
        let s0 = d.initial_state(&data, tau);
        let s1 = lf_step(&d, &data, &s0).unwrap();
        let lu = d.op.apply_lh(&s0.u).unwrap();
        for i in 0..s0.u.len() {
            let expected = s0.u[i] + tau * s0.v[i] - 0.5 * tau * tau * lu[i];
            assert!((s1.u[i] - expected).abs() < 1e-14 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn cn_energy_conserved() {
        let d = disc(4, 1);
        let data = mode();
        let tau = 0.05;
        let solver = SolverConfig {
            tol: 1e-14,
            ..Default::default()
        };
        let sys = CnSystem::new(&d, tau, solver).unwrap();
        let mut s = d.initial_state(&data, tau);
        let e0 = d.energy(&s);
        for _ in 0..200 {
            s = cn_step(&d, &sys, &data, &s).unwrap().0;
        }
        assert!((d.energy(&s) - e0).abs() <= 1e-10 * e0);
    }

    #[test]
    fn cn_is_unconditionally_stable() {
        let d = disc(4, 1);
        let tau = 1000.0 * leapfrog_tau_max(&d.op);
        let sys = CnSystem::new(&d, tau, SolverConfig { tol: 1e-13, ..Default::default() }).unwrap();
        let data = mode();
        let mut s = d.initial_state(&data, tau);
        let e0 = d.energy(&s);
        for _ in 0..20 {
            s = cn_step(&d, &sys, &data, &s).unwrap().0;
            assert!(d.energy(&s) <= e0 * (1.0 + 1e-8));
        }
    }

    #[test]
    fn time_reversible() {
        let d = disc(3, 1);
        let data = mode();
        let tau = 0.5 * leapfrog_tau_max(&d.op);
        let sys = CnSystem::new(&d, tau, SolverConfig { tol: 1e-14, ..Default::default() }).unwrap();
        let s0 = d.initial_state(&data, tau);
        for method in [Method::Cn, Method::Lf] {
            let mut s = s0.clone();
            let step = |s: &State| match method {
                Method::Lf => lf_step(&d, &data, s).unwrap(),
                _ => cn_step(&d, &sys, &data, s).unwrap().0,
            };
            for _ in 0..25 {
                s = step(&s);
            }
            s.v.iter_mut().for_each(|v| *v = -*v);
            for _ in 0..25 {
                s = step(&s);
            }
            s.v.iter_mut().for_each(|v| *v = -*v);
            for (a, b) in s.u.iter().chain(&s.v).zip(s0.u.iter().chain(&s0.v)) {
                assert!((a - b).abs() < 1e-9, "{method:?}");
            }
        }
    }

    #[test]
    fn leapfrog_shifted_energy() {
        let d = disc(4, 1);
        let data = mode();
        let tau = 0.5 * leapfrog_tau_max(&d.op);
        let mut s = d.initial_state(&data, tau);
        let mut next = lf_step(&d, &data, &s).unwrap();
        let e0 = d.shifted_energy(&s.u, &next.u, tau);
        for _ in 0..200 {
            s = next;
            next = lf_step(&d, &data, &s).unwrap();
        }
        let e = d.shifted_energy(&s.u, &next.u, tau);
        assert!((e - e0).abs() <= 1e-10 * e0);
    }

    #[test]
    fn cfl_guard_and_instability() {
        let d = disc(4, 1);
        let data = mode();
        let tau_max = leapfrog_tau_max(&d.op);
        let tau = 1.5 * tau_max;
        assert!(matches!(
            run(&d, &data, Method::Lf, tau, 10.0 * tau, SolverConfig::default(), None),
            Err(IntegratorError::CflViolation { .. })
        ));
        // bypass the guard and watch the growth check fire
        let guard = GrowthGuard::new(&d.initial_state(&data, tau));
        let mut s = d.initial_state(&data, 1.5 * 2.0 / estimate_lambda_max(&d.op).sqrt());
        let mut failed = false;
        for _ in 0..2000 {
            s = lf_step(&d, &data, &s).unwrap();
            if guard.check(&s).is_err() {
                failed = true;
                break;
            }
        }
        assert!(failed);
    }

    #[test]
    fn power_iteration_matches_dense_bound() {
        let d = disc(2, 1);
        let lambda = estimate_lambda_max(&d.op);
        // Gershgorin bound on M^{-1} A
        let a = d.op.matrix();
        let m = d.op.mass();
        let bound = (0..a.n())
            .map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>() / m[i])
            .fold(0.0, f64::max);
        assert!(lambda > 0.0 && lambda <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn time_grid_adjusts() {
        assert_eq!(time_grid(0.1, 1.0).unwrap().1, 10);
        let (tau, n) = time_grid(0.3, 1.0).unwrap();
        assert_eq!(n, 4);
        assert!((tau - 0.25).abs() < 1e-15);
        assert_eq!(time_grid(0.1, 0.0).unwrap().1, 0);
        assert!(time_grid(0.0, 1.0).is_err());
    }

    #[test]
    fn zero_steps_returns_projection() {
        let d = disc(2, 1);
        let data = mode();
        let out = run(&d, &data, Method::Cn, 0.1, 0.0, SolverConfig::default(), None).unwrap();
        assert_eq!(out.state, d.initial_state(&data, 0.1));
    }

    #[test]
    fn methods_agree_to_second_order() {
        let d = disc(3, 1);
        let data = mode();
        let diff = |tau: f64| {
            let cn = run(&d, &data, Method::Cn, tau, 0.2, SolverConfig { tol: 1e-13, ..Default::default() }, None).unwrap();
            let lf = run(&d, &data, Method::Lf, tau, 0.2, SolverConfig::default(), None).unwrap();
            cn.state.u.iter().zip(&lf.state.u).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let tau = 0.5 * leapfrog_tau_max(&d.op);
        let tau = 0.2 / (0.2 / tau).ceil();
        let (a, b) = (diff(tau), diff(tau / 2.0));
        let order = (a / b).log2();
        assert!(order > 1.7, "order {order}");
    }
}
