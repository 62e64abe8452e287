//! Non-iterative overlapping domain splitting.
//!
//! One step per subdomain `i`:
//!
//! 1. a leapfrog step on the prediction strip `P_i` gives `u*` on both
//!    sides of the artificial interface `Gamma_i`;
//! 2. the weak interface data `G_Gamma({u*}_w) + G_Gamma({u^n}_w)` plus the
//!    Dirichlet data at both time levels form the boundary term;
//! 3. a Crank-Nicolson step on the overlapped subdomain uses that term.
//!
//! Afterwards every context replaces the values of cells it does not own by
//! the owner's values, in the rounds of a [`CommSchedule`].

mod context;

pub use context::{InterfaceFace, SubdomainContext};

use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::comms::{
    build_exchange_plan, graph_from_plan, greedy_schedule, run_exchange, CommError, CommGraph, CommSchedule,
    Delivery, ExchangeMode, ExchangePlan,
};
use crate::dg::BrokenSpace;
use crate::integrators::{IntegratorError, ProblemData, SolverConfig, State};
use crate::linalg::LinalgError;
use crate::mesh::SubdomainLayout;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("subdomain {id}: {source}")]
    Subdomain { id: usize, source: IntegratorError },
    #[error("subdomain {id}: {source}")]
    Linalg { id: usize, source: LinalgError },
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error("after the exchange, cell {cell} in subdomain {subdomain} differs from its owner")]
    Inconsistent { cell: usize, subdomain: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub eta: f64,
    pub tau: f64,
    pub solver: SolverConfig,
    /// Threads used for the subdomain steps and the exchange.
    pub workers: usize,
    /// Scan all copies against their owners after every exchange.
    pub verify: bool,
    pub exchange_timeout: Duration,
}

impl SplitConfig {
    pub fn new(eta: f64, tau: f64) -> Self {
        Self {
            eta,
            tau,
            solver: SolverConfig::default(),
            workers: 1,
            verify: cfg!(debug_assertions),
            exchange_timeout: Duration::from_secs(30),
        }
    }
}

/// Per-step record.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub iterations: Vec<usize>,
    pub bytes: usize,
    pub max_interface_jump: f64,
}

/// All subdomain contexts of a splitting run.
#[derive(Debug)]
pub struct SplitState {
    pub space: Arc<BrokenSpace>,
    pub layout: Arc<SubdomainLayout>,
    pub contexts: Vec<SubdomainContext>,
    pub plan: ExchangePlan,
    pub graph: CommGraph,
    pub schedule: CommSchedule,
    pub config: SplitConfig,
    pub step: usize,
}

impl SplitState {
    pub fn tau(&self) -> f64 {
        self.config.tau
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.tau
    }

    fn exchange_mode(&self) -> ExchangeMode {
        if self.config.workers > 1 {
            ExchangeMode::Threaded {
                timeout: self.config.exchange_timeout,
            }
        } else {
            ExchangeMode::Sequential
        }
    }
}

/// Builds all contexts with locally projected initial values.
pub fn ds_init(
    space: Arc<BrokenSpace>,
    layout: Arc<SubdomainLayout>,
    data: &ProblemData,
    config: SplitConfig,
) -> Result<SplitState, SplitError> {
    if layout.owner.len() != space.mesh().n_cells() {
        return Err(SplitError::Layout("layout and mesh differ in cell count".into()));
    }
    let plan = build_exchange_plan(&layout);
    let ids: Vec<usize> = (0..layout.n_subdomains).collect();
    let built = parallel_map(&ids, config.workers, |&id| {
        SubdomainContext::new(id, space.clone(), &layout, &plan, data, &config)
    });
    let contexts = built.into_iter().collect::<Result<Vec<_>, _>>()?;
    let graph = graph_from_plan(&plan, space.dofs_per_cell());
    let schedule = greedy_schedule(&graph);
    Ok(SplitState {
        space,
        layout,
        contexts,
        plan,
        graph,
        schedule,
        config,
        step: 0,
    })
}

/// One splitting step: every subdomain predicts and solves, then the
/// overlaps are exchanged.
pub fn ds_step(split: &mut SplitState, data: &ProblemData) -> Result<StepDiagnostics, SplitError> {
    let workers = split.config.workers;
    let results = parallel_map_mut(&mut split.contexts, workers, |ctx| ctx.advance(data));
    let mut iterations = Vec::with_capacity(results.len());
    let mut jump: f64 = 0.0;
    for r in results {
        let (it, j) = r?;
        iterations.push(it);
        jump = jump.max(j);
    }
    let schedule = split.schedule.clone();
    let log = exchange(split, &schedule)?;
    split.step += 1;
    if split.config.verify {
        check_consistency(split)?;
    }
    Ok(StepDiagnostics {
        step: split.step,
        iterations,
        bytes: log.iter().map(|d| d.len * std::mem::size_of::<f64>()).sum(),
        max_interface_jump: jump,
    })
}

/// Replaces every non-owned cell of every context copy by the owner's
/// values, following `schedule`.
pub fn exchange(split: &mut SplitState, schedule: &CommSchedule) -> Result<Vec<Delivery>, SplitError> {
    for ctx in &mut split.contexts {
        ctx.refresh_prediction_copy();
    }
    let mode = split.exchange_mode();
    Ok(run_exchange(&mut split.contexts, schedule, mode)?)
}

/// Checks that every context copy of every cell equals the owner's values.
pub fn check_consistency(split: &SplitState) -> Result<(), SplitError> {
    let n = split.space.dofs_per_cell();
    for ctx in &split.contexts {
        for (cells, state) in [(&ctx.cells, &ctx.state), (&ctx.prediction_cells, &ctx.prediction_state)] {
            for (l, c) in cells.iter().enumerate() {
                let owner = &split.contexts[split.layout.owner[c]];
                let k = owner.cells.local_index(c).expect("owned cells lie in the overlapped domain");
                let same = state.u[l * n..(l + 1) * n] == owner.state.u[k * n..(k + 1) * n]
                    && state.v[l * n..(l + 1) * n] == owner.state.v[k * n..(k + 1) * n];
                if !same {
                    return Err(SplitError::Inconsistent { cell: c, subdomain: ctx.id });
                }
            }
        }
    }
    Ok(())
}

/// Global state from the owners' values.
pub fn assemble_global(split: &SplitState) -> State {
    let space = &split.space;
    let n = space.dofs_per_cell();
    let mut u = vec![0.0; space.n_dofs()];
    let mut v = vec![0.0; space.n_dofs()];
    for (c, &o) in split.layout.owner.iter().enumerate() {
        let ctx = &split.contexts[o];
        let k = ctx.cells.local_index(c).expect("owned cells lie in the overlapped domain");
        u[space.cell_dofs(c)].copy_from_slice(&ctx.state.u[k * n..(k + 1) * n]);
        v[space.cell_dofs(c)].copy_from_slice(&ctx.state.v[k * n..(k + 1) * n]);
    }
    State {
        u,
        v,
        step: split.step,
        tau: split.config.tau,
    }
}

/// Global state as the sum over subdomains of the zero extension of each
/// context restricted to its owned cells.
pub fn assemble_global_sum(split: &SplitState) -> State {
    let space = &split.space;
    let n = space.dofs_per_cell();
    let mut u = vec![0.0; space.n_dofs()];
    let mut v = vec![0.0; space.n_dofs()];
    for (i, ctx) in split.contexts.iter().enumerate() {
        let mut ui = vec![0.0; space.n_dofs()];
        let mut vi = vec![0.0; space.n_dofs()];
        for c in split.layout.owned[i].iter() {
            let k = ctx.cells.local_index(c).expect("owned cells lie in the overlapped domain");
            ui[space.cell_dofs(c)].copy_from_slice(&ctx.state.u[k * n..(k + 1) * n]);
            vi[space.cell_dofs(c)].copy_from_slice(&ctx.state.v[k * n..(k + 1) * n]);
        }
        for d in 0..u.len() {
            u[d] += ui[d];
            v[d] += vi[d];
        }
    }
    State {
        u,
        v,
        step: split.step,
        tau: split.config.tau,
    }
}

/// Runs `steps` splitting steps.
pub fn ds_run(split: &mut SplitState, data: &ProblemData, steps: usize) -> Result<Vec<StepDiagnostics>, SplitError> {
    (0..steps).map(|_| ds_step(split, data)).collect()
}

/// CSV of per-step diagnostics: step, iterations per subdomain, exchanged
/// bytes, max interface jump.
pub fn diagnostics_csv(diags: &[StepDiagnostics]) -> String {
    let mut out = String::new();
    let n = diags.first().map_or(0, |d| d.iterations.len());
    out.push_str("step");
    for i in 0..n {
        out.push_str(&format!(",iterations_{}", i + 1));
    }
    out.push_str(",bytes,max_interface_jump\n");
    for d in diags {
        out.push_str(&d.step.to_string());
        for it in &d.iterations {
            out.push_str(&format!(",{it}"));
        }
        out.push_str(&format!(",{},{:e}\n", d.bytes, d.max_interface_jump));
    }
    out
}

fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

fn parallel_map_mut<T: Send, R: Send>(items: &mut [T], workers: usize, f: impl Fn(&mut T) -> R + Sync) -> Vec<R> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter_mut().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks_mut(chunk)
            .map(|c| s.spawn(|| c.iter_mut().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}
