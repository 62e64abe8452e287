use std::collections::BTreeMap;
use std::sync::Arc;

use super::{SplitConfig, SplitError};
use crate::comms::{CommError, Endpoint, ExchangePlan, Tag};
use crate::dg::BrokenSpace;
use crate::integrators::{
    add, cn_advance, lf_half, CnSystem, Discretization, GrowthGuard, IntegratorError, ProblemData, State,
};
use crate::linalg::SolverReport;
use crate::mesh::{CellSet, SubdomainLayout};
use crate::swip::{add_boundary_term_indexed, face_coefficients, face_quadrature};

/// Face of the artificial interface with the basis values of both adjacent
/// cells at its quadrature points.
#[derive(Debug, Clone)]
pub struct InterfaceFace {
    pub face: usize,
    /// Indices of the lower and higher cell in the prediction strip.
    pub cells: [usize; 2],
    pub omega: [f64; 2],
    values: [Vec<Vec<f64>>; 2],
}

impl InterfaceFace {
    /// Weighted average and jump of the two traces of `w` (a vector on the
    /// prediction strip) at quadrature point `q`.
    fn traces(&self, w: &[f64], n: usize, q: usize) -> (f64, f64) {
        let t = [0, 1].map(|s| {
            let block = &w[self.cells[s] * n..(self.cells[s] + 1) * n];
            block.iter().zip(&self.values[s][q]).map(|(a, b)| a * b).sum::<f64>()
        });
        (self.omega[0] * t[0] + self.omega[1] * t[1], t[0] - t[1])
    }
}

/// Everything one subdomain worker owns.
#[derive(Debug)]
pub struct SubdomainContext {
    pub id: usize,
    /// Overlapped subdomain.
    pub cells: CellSet,
    /// Prediction strip around the interface.
    pub prediction_cells: CellSet,
    /// Interface faces, ascending.
    pub interface: Vec<usize>,
    pub disc: Discretization,
    pub prediction: Option<Discretization>,
    pub cn: CnSystem,
    /// State on the overlapped subdomain.
    pub state: State,
    /// Copy of the state on the prediction strip.
    pub prediction_state: State,
    interface_faces: Vec<InterfaceFace>,
    guard: GrowthGuard,
    send: BTreeMap<usize, Vec<usize>>,
    recv: BTreeMap<usize, Vec<(Option<usize>, Option<usize>)>>,
}

impl SubdomainContext {
    pub fn new(
        id: usize,
        space: Arc<BrokenSpace>,
        layout: &SubdomainLayout,
        plan: &ExchangePlan,
        data: &ProblemData,
        config: &SplitConfig,
    ) -> Result<Self, SplitError> {
        let cells = layout.overlapped[id].clone();
        let prediction_cells = layout.prediction[id].clone();
        let interface = layout.interfaces[id].clone();
        let swip_err = |e| SplitError::Subdomain {
            id,
            source: IntegratorError::Swip(e),
        };
        let disc = Discretization::on_cells(space.clone(), &cells, &interface, config.eta).map_err(swip_err)?;
        let prediction = if prediction_cells.is_empty() {
            None
        } else {
            Some(Discretization::on_cells(space.clone(), &prediction_cells, &[], config.eta).map_err(swip_err)?)
        };
        let cn = CnSystem::new(&disc, config.tau, config.solver).map_err(|source| SplitError::Linalg { id, source })?;

        let mesh = space.mesh();
        let n = space.dofs_per_cell();
        let mut interface_faces = Vec::with_capacity(interface.len());
        for &f in &interface {
            let face = mesh.face(f);
            let pair = [Some(face.owner), face.neighbor].map(|c| c.and_then(|c| prediction_cells.local_index(c)));
            let [Some(lo), Some(hi)] = pair else {
                return Err(SplitError::Layout(format!(
                    "interface face {f} of subdomain {id} is not straddled by the prediction strip"
                )));
            };
            let quad = face_quadrature(&space, f);
            let mut grads = vec![[0.0; 2]; n];
            let values = [face.owner, face.neighbor.unwrap()].map(|c| {
                quad.iter()
                    .map(|(x, _)| {
                        let mut v = vec![0.0; n];
                        space.basis_at(c, *x, &mut v, &mut grads);
                        v
                    })
                    .collect()
            });
            interface_faces.push(InterfaceFace {
                face: f,
                cells: [lo, hi],
                omega: face_coefficients(mesh, f).omega,
                values,
            });
        }

        let mut send = BTreeMap::new();
        for j in (0..layout.n_subdomains).filter(|&j| j != id) {
            let wanted = plan.cells(j, id);
            if !wanted.is_empty() {
                let local = wanted
                    .iter()
                    .map(|&c| cells.local_index(c).expect("owned cells lie in the overlapped domain"))
                    .collect();
                send.insert(j, local);
            }
        }
        let recv = plan
            .sources(id)
            .map(|j| {
                let slots = plan
                    .cells(id, j)
                    .iter()
                    .map(|&c| (cells.local_index(c), prediction_cells.local_index(c)))
                    .collect();
                (j, slots)
            })
            .collect();

        let state = disc.initial_state(data, config.tau);
        let prediction_state = match &prediction {
            Some(p) => p.initial_state(data, config.tau),
            None => State::zeros(0, config.tau),
        };
        let guard = GrowthGuard::new(&prediction_state);
        Ok(Self {
            id,
            cells,
            prediction_cells,
            interface,
            disc,
            prediction,
            cn,
            state,
            prediction_state,
            interface_faces,
            guard,
            send,
            recv,
        })
    }

    pub fn interface_faces(&self) -> &[InterfaceFace] {
        &self.interface_faces
    }

    fn times(&self) -> (f64, f64) {
        let tau = self.state.tau;
        (self.state.step as f64 * tau, (self.state.step + 1) as f64 * tau)
    }

    /// Leapfrog prediction `u*` on the prediction strip.
    pub fn predict(&self, data: &ProblemData) -> Result<Vec<f64>, IntegratorError> {
        let Some(p) = &self.prediction else {
            return Ok(Vec::new());
        };
        let tau = self.state.tau;
        let (t0, _) = self.times();
        let s = &self.prediction_state;
        let half = lf_half(&p.op, &s.u, &s.v, &p.source(data, t0), &p.dirichlet_load(data, t0), 0.5 * tau)?;
        let u: Vec<f64> = s.u.iter().zip(&half).map(|(u, v)| u + tau * v).collect();
        self.guard.check(&State {
            u: u.clone(),
            v: half,
            step: s.step + 1,
            tau,
        })?;
        Ok(u)
    }

    /// `G_Gamma(w)` for the weighted average of a strip vector `w`, and the
    /// largest jump of `w` across the interface.
    fn interface_term(&self, w: &[f64]) -> (Vec<f64>, f64) {
        let space = &self.disc.space;
        let n = space.dofs_per_cell();
        let mut out = vec![0.0; self.disc.n_dofs()];
        if self.interface.is_empty() {
            return (out, 0.0);
        }
        let mut averages = Vec::with_capacity(self.interface_faces.len());
        let mut jump: f64 = 0.0;
        for f in &self.interface_faces {
            let vals: Vec<f64> = (0..f.values[0].len())
                .map(|q| {
                    let (avg, j) = f.traces(w, n, q);
                    jump = jump.max(j.abs());
                    avg
                })
                .collect();
            averages.push(vals);
        }
        add_boundary_term_indexed(space, &self.cells, &self.interface, self.disc.op.eta(), &|k, q, _| averages[k][q], &mut out)
            .expect("interface faces lie on the boundary of the overlapped domain");
        (out, jump)
    }

    /// Sum of the weak data terms
    /// `G_Gamma({u*}_w) + G_D(g^{n+1}) + G_Gamma({u^n}_w) + G_D(g^n)`,
    /// and the largest jump of `u*` across the interface.
    pub fn interface_data(&self, u_star: &[f64], data: &ProblemData) -> (Vec<f64>, f64) {
        let (t0, t1) = self.times();
        let (star, jump) = self.interface_term(u_star);
        let (now, _) = self.interface_term(&self.prediction_state.u);
        let g1 = self.disc.dirichlet_load(data, t1);
        let g0 = self.disc.dirichlet_load(data, t0);
        let sum = add(&add(&add(&star, &g1), &now), &g0);
        (sum, jump)
    }

    /// Crank-Nicolson step on the overlapped subdomain with the data term
    /// `g_sum` from [`Self::interface_data`].
    pub fn local_cn(&self, g_sum: &[f64], data: &ProblemData) -> Result<(State, SolverReport), IntegratorError> {
        let (t0, t1) = self.times();
        let f_sum = add(&self.disc.source(data, t1), &self.disc.source(data, t0));
        cn_advance(&self.disc, &self.cn, &self.state, &f_sum, g_sum)
    }

    /// Prediction, interface data and local Crank-Nicolson. Returns the CG
    /// iteration count and the largest interface jump of the prediction.
    pub fn advance(&mut self, data: &ProblemData) -> Result<(usize, f64), SplitError> {
        let wrap = |source| SplitError::Subdomain { id: self.id, source };
        let u_star = self.predict(data).map_err(wrap)?;
        let (g_sum, jump) = self.interface_data(&u_star, data);
        let (state, report) = self.local_cn(&g_sum, data).map_err(wrap)?;
        self.state = state;
        Ok((report.iterations, jump))
    }

    /// Copies the new values of cells shared with the overlapped domain
    /// into the strip copy; the remaining strip cells arrive in the exchange.
    pub fn refresh_prediction_copy(&mut self) {
        let n = self.disc.space.dofs_per_cell();
        for (l, c) in self.prediction_cells.iter().enumerate() {
            if let Some(k) = self.cells.local_index(c) {
                self.prediction_state.u[l * n..(l + 1) * n].copy_from_slice(&self.state.u[k * n..(k + 1) * n]);
                self.prediction_state.v[l * n..(l + 1) * n].copy_from_slice(&self.state.v[k * n..(k + 1) * n]);
            }
        }
        self.prediction_state.step = self.state.step;
    }
}

impl Endpoint for SubdomainContext {
    fn pack(&self, peer: usize, tag: Tag) -> Vec<f64> {
        let n = self.disc.space.dofs_per_cell();
        let src = match tag {
            Tag::U => &self.state.u,
            Tag::V => &self.state.v,
        };
        let cells = self.send.get(&peer).map_or(&[][..], Vec::as_slice);
        let mut out = Vec::with_capacity(cells.len() * n);
        for &k in cells {
            out.extend_from_slice(&src[k * n..(k + 1) * n]);
        }
        out
    }

    fn unpack(&mut self, peer: usize, tag: Tag, payload: &[f64]) -> Result<(), CommError> {
        let n = self.disc.space.dofs_per_cell();
        let slots = self.recv.get(&peer).map_or(&[][..], Vec::as_slice);
        if payload.len() != slots.len() * n {
            return Err(CommError::PayloadLength {
                from: peer,
                to: self.id,
                expected: slots.len() * n,
                got: payload.len(),
            });
        }
        let (main, strip) = match tag {
            Tag::U => (&mut self.state.u, &mut self.prediction_state.u),
            Tag::V => (&mut self.state.v, &mut self.prediction_state.v),
        };
        for (block, &(a, b)) in payload.chunks(n.max(1)).zip(slots) {
            if let Some(k) = a {
                main[k * n..(k + 1) * n].copy_from_slice(block);
            }
            if let Some(k) = b {
                strip[k * n..(k + 1) * n].copy_from_slice(block);
            }
        }
        Ok(())
    }
}
