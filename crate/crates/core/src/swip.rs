//! Symmetric weighted interior penalty (SWIP) operator.
//!
//! For a cell set `S` the bilinear form is
//!
//! ```text
//! a(u, w) = sum_K (k grad u, grad w)_K
//!         - sum_F ({k grad u}_w . n [w] + [u] {k grad w}_w . n)_F
//!         + sum_F eta gamma_F / h_F ([u], [w])_F
//! ```
//!
//! over the faces interior to `S` plus a list of penalized one-sided faces
//! (Dirichlet faces and artificial interfaces). On an interior face the
//! normal points from the lower to the higher cell index and
//! `[u] = u_lower - u_higher`; on a one-sided face the normal points out of
//! `S` and `[u]` is the inner trace.

use thiserror::Error;

use crate::dg::BrokenSpace;
use crate::linalg::SparseSymMatrix;
use crate::mesh::{CellSet, Mesh, Point};

#[derive(Debug, Error)]
pub enum SwipError {
    #[error("penalty parameter must be positive, got {0}")]
    InvalidPenalty(f64),
    #[error("face {face} has no incident cell in the assembled cell set")]
    FaceOutsideSet { face: usize },
    #[error("face {face} is interior to the assembled cell set and cannot be one-sided")]
    FaceNotOnBoundary { face: usize },
    #[error("vector of length {got} does not match the operator ({expected} dofs)")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("coercivity violated: u^T A u = {value:e} (increase the penalty)")]
    Coercivity { value: f64 },
}

/// Penalty used when none is configured: `4 (k + 1) (k + 2)`.
pub fn default_eta(degree: usize) -> f64 {
    4.0 * ((degree + 1) * (degree + 2)) as f64
}

/// Averaging weights and penalty scale of a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceCoefficients {
    /// Weights of the lower and the higher cell (`[1, 0]` on boundary faces).
    pub omega: [f64; 2],
    pub gamma: f64,
}

/// Weights `w_1 = k_2 / (k_1 + k_2)`, `w_2 = k_1 / (k_1 + k_2)` and the
/// harmonic mean `gamma = 2 k_1 k_2 / (k_1 + k_2)` of a mesh face.
pub fn face_coefficients(mesh: &Mesh, face: usize) -> FaceCoefficients {
    let f = mesh.face(face);
    match f.neighbor {
        Some(nb) => two_sided(mesh.kappa(f.owner), mesh.kappa(nb)),
        None => one_sided(mesh.kappa(f.owner)),
    }
}

fn two_sided(k1: f64, k2: f64) -> FaceCoefficients {
    let s = k1 + k2;
    FaceCoefficients {
        omega: [k2 / s, k1 / s],
        gamma: 2.0 * k1 * k2 / s,
    }
}

fn one_sided(k: f64) -> FaceCoefficients {
    FaceCoefficients {
        omega: [1.0, 0.0],
        gamma: k,
    }
}

/// Unit normal of a face pointing out of `cell`.
pub fn outward_normal(mesh: &Mesh, face: usize, cell: usize) -> Point {
    let [a, b] = mesh.face(face).vertices.map(|v| mesh.vertex(v));
    let t = [b[0] - a[0], b[1] - a[1]];
    let len = t[0].hypot(t[1]);
    let mut n = [t[1] / len, -t[0] / len];
    let c = mesh.centroid(cell);
    let m = mesh.face_midpoint(face);
    if n[0] * (m[0] - c[0]) + n[1] * (m[1] - c[1]) < 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

/// Physical quadrature points and weights on a face.
pub fn face_quadrature(space: &BrokenSpace, face: usize) -> Vec<(Point, f64)> {
    let mesh = space.mesh();
    let [a, b] = mesh.face(face).vertices.map(|v| mesh.vertex(v));
    let len = mesh.h_face(face);
    let rule = space.face_rule();
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(s, w)| ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], w * len))
        .collect()
}

/// Metadata of an assembled face.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledFace {
    pub face: usize,
    pub coefficients: FaceCoefficients,
    /// Cell of the set whose trace is used, for one-sided faces.
    pub inside: Option<usize>,
}

/// Stiffness matrix of the SWIP form on a cell set, local numbering.
#[derive(Debug, Clone)]
pub struct SwipOperator {
    cells: CellSet,
    matrix: SparseSymMatrix,
    mass: Vec<f64>,
    eta: f64,
    faces: Vec<AssembledFace>,
    penalized: Vec<usize>,
}

impl SwipOperator {
    pub fn cells(&self) -> &CellSet {
        &self.cells
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    /// Diagonal mass matrix on the same cells.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn n_dofs(&self) -> usize {
        self.mass.len()
    }

    /// Every assembled face, in ascending face order.
    pub fn faces(&self) -> &[AssembledFace] {
        &self.faces
    }

    /// One-sided penalized faces, ascending.
    pub fn penalized_faces(&self) -> &[usize] {
        &self.penalized
    }

    fn check(&self, u: &[f64]) -> Result<(), SwipError> {
        if u.len() != self.n_dofs() {
            return Err(SwipError::ShapeMismatch {
                expected: self.n_dofs(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// `A u`.
    pub fn apply_a(&self, u: &[f64]) -> Result<Vec<f64>, SwipError> {
        self.check(u)?;
        Ok(self.matrix.mul(u))
    }

    /// `L_h u = M^{-1} A u`.
    pub fn apply_lh(&self, u: &[f64]) -> Result<Vec<f64>, SwipError> {
        let mut out = self.apply_a(u)?;
        for (o, m) in out.iter_mut().zip(&self.mass) {
            *o /= m;
        }
        Ok(out)
    }

    /// `a(u, w)`.
    pub fn form(&self, u: &[f64], w: &[f64]) -> Result<f64, SwipError> {
        self.check(w)?;
        Ok(crate::linalg::dot(w, &self.apply_a(u)?))
    }

    /// SWIP energy norm `sqrt(u^T A u)`.
    pub fn a_norm(&self, u: &[f64]) -> Result<f64, SwipError> {
        let q = self.form(u, u)?;
        let scale: f64 = u.iter().map(|x| x * x).sum();
        if q < -1e-10 * self.matrix.norm_inf() * scale {
            return Err(SwipError::Coercivity { value: q });
        }
        Ok(q.max(0.0).sqrt())
    }
}

/// Assembles the SWIP operator on `cells`.
///
/// Faces with both cells in the set are two-sided; `penalized` lists faces
/// with exactly one cell in the set that are penalized one-sidedly. All
/// other faces on the boundary of the set contribute nothing.
///
/// Row block `K` only depends on `K`, its faces and the cells across them,
/// and entries are accumulated in ascending face order, so a cell whose
/// faces are treated alike in two assemblies gets bitwise identical rows.
pub fn assemble_swip(
    space: &BrokenSpace,
    cells: &CellSet,
    penalized: &[usize],
    eta: f64,
) -> Result<SwipOperator, SwipError> {
    if !(eta > 0.0) {
        return Err(SwipError::InvalidPenalty(eta));
    }
    let mesh = space.mesh();
    let n = space.dofs_per_cell();
    let nc = cells.len();

    let mut penalized: Vec<usize> = penalized.to_vec();
    penalized.sort_unstable();
    penalized.dedup();
    for &f in &penalized {
        let face = mesh.face(f);
        let inside = cells.contains(face.owner) as u8 + face.neighbor.is_some_and(|c| cells.contains(c)) as u8;
        match inside {
            0 => return Err(SwipError::FaceOutsideSet { face: f }),
            2 => return Err(SwipError::FaceNotOnBoundary { face: f }),
            _ => {}
        }
    }

    // faces to assemble, ascending
    let mut interior: Vec<usize> = cells
        .iter()
        .flat_map(|c| mesh.cell_faces(c))
        .filter(|&f| {
            let face = mesh.face(f);
            face.neighbor.is_some_and(|nb| cells.contains(nb) && cells.contains(face.owner))
        })
        .collect();
    interior.sort_unstable();
    interior.dedup();
    let mut all_faces: Vec<(usize, bool)> = interior
        .iter()
        .map(|&f| (f, false))
        .chain(penalized.iter().map(|&f| (f, true)))
        .collect();
    all_faces.sort_unstable();

    // block pattern: each cell couples with itself and its face neighbours
    let mut neighbors: Vec<Vec<usize>> = (0..nc).map(|i| vec![i]).collect();
    for &f in &interior {
        let face = mesh.face(f);
        let a = cells.local_index(face.owner).unwrap();
        let b = cells.local_index(face.neighbor.unwrap()).unwrap();
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    let mut blocks: Vec<Vec<Vec<f64>>> = neighbors.iter().map(|nb| vec![vec![0.0; n * n]; nb.len()]).collect();
    let block_index = |neighbors: &Vec<Vec<usize>>, i: usize, j: usize| neighbors[i].binary_search(&j).unwrap();

    // volume terms
    let rule = space.volume_rule();
    let grads_ref = space.volume_grads();
    let mut grads = vec![[0.0; 2]; n];
    for (i, c) in cells.iter().enumerate() {
        let geo = space.geometry(c);
        let scale = mesh.kappa(c) * geo.det.abs();
        let k = block_index(&neighbors, i, i);
        let block = &mut blocks[i][k];
        for (w, gq) in rule.weights.iter().zip(grads_ref) {
            for (g, r) in grads.iter_mut().zip(gq) {
                *g = geo.push_gradient(*r);
            }
            let ws = w * scale;
            for p in 0..n {
                for q in 0..n {
                    block[p * n + q] += ws * (grads[p][0] * grads[q][0] + grads[p][1] * grads[q][1]);
                }
            }
        }
    }

    // face terms
    let mut faces_meta = Vec::with_capacity(all_faces.len());
    let mut vals = vec![0.0; n];
    for &(f, is_one_sided) in &all_faces {
        let face = mesh.face(f);
        let h = mesh.h_face(f);
        let quad = face_quadrature(space, f);
        if is_one_sided {
            let inside = if cells.contains(face.owner) { face.owner } else { face.neighbor.unwrap() };
            let coef = one_sided(mesh.kappa(inside));
            let sigma = eta * coef.gamma / h;
            let nrm = outward_normal(mesh, f, inside);
            let kap = mesh.kappa(inside);
            let i = cells.local_index(inside).unwrap();
            let k = block_index(&neighbors, i, i);
            let block = &mut blocks[i][k];
            let mut jump = vec![0.0; n];
            let mut flux = vec![0.0; n];
            for (x, w) in &quad {
                space.basis_at(inside, *x, &mut vals, &mut grads);
                for p in 0..n {
                    jump[p] = vals[p];
                    flux[p] = kap * (grads[p][0] * nrm[0] + grads[p][1] * nrm[1]);
                }
                add_face_block(block, n, 0, 0, &jump, &flux, *w, sigma);
            }
            faces_meta.push(AssembledFace {
                face: f,
                coefficients: coef,
                inside: Some(inside),
            });
        } else {
            let (c1, c2) = (face.owner, face.neighbor.unwrap());
            let coef = face_coefficients(mesh, f);
            let sigma = eta * coef.gamma / h;
            let nrm = outward_normal(mesh, f, c1);
            let (k1, k2) = (mesh.kappa(c1), mesh.kappa(c2));
            let (i1, i2) = (cells.local_index(c1).unwrap(), cells.local_index(c2).unwrap());
            let mut jump = vec![0.0; 2 * n];
            let mut flux = vec![0.0; 2 * n];
            let mut per_point = Vec::with_capacity(quad.len());
            for (x, w) in &quad {
                space.basis_at(c1, *x, &mut vals, &mut grads);
                for p in 0..n {
                    jump[p] = vals[p];
                    flux[p] = coef.omega[0] * k1 * (grads[p][0] * nrm[0] + grads[p][1] * nrm[1]);
                }
                space.basis_at(c2, *x, &mut vals, &mut grads);
                for p in 0..n {
                    jump[n + p] = -vals[p];
                    flux[n + p] = coef.omega[1] * k2 * (grads[p][0] * nrm[0] + grads[p][1] * nrm[1]);
                }
                per_point.push((jump.clone(), flux.clone(), *w));
            }
            for (bi, ci, oi) in [(i1, i1, (0, 0)), (i1, i2, (0, n)), (i2, i1, (n, 0)), (i2, i2, (n, n))] {
                let k = block_index(&neighbors, bi, ci);
                let block = &mut blocks[bi][k];
                for (jump, flux, w) in &per_point {
                    add_face_block(block, n, oi.0, oi.1, jump, flux, *w, sigma);
                }
            }
            faces_meta.push(AssembledFace {
                face: f,
                coefficients: coef,
                inside: None,
            });
        }
    }

    // CSR from the upper triangle, mirrored
    let ndofs = n * nc;
    let mut row_ptr = Vec::with_capacity(ndofs + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..nc {
        for p in 0..n {
            let row = i * n + p;
            for (k, &j) in neighbors[i].iter().enumerate() {
                for q in 0..n {
                    let col = j * n + q;
                    let v = if col >= row {
                        blocks[i][k][p * n + q]
                    } else {
                        let kk = block_index(&neighbors, j, i);
                        blocks[j][kk][q * n + p]
                    };
                    col_idx.push(col);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    let matrix = SparseSymMatrix::from_csr(ndofs, row_ptr, col_idx, values)
        .expect("assembled pattern is symmetric");

    Ok(SwipOperator {
        cells: cells.clone(),
        matrix,
        mass: space.mass_diag(cells),
        eta,
        faces: faces_meta,
        penalized,
    })
}

/// Adds `w (-D_q J_p - J_q D_p + sigma J_q J_p)` for test index `p` (row,
/// offset `ro`) and trial index `q` (column, offset `co`).
#[allow(clippy::too_many_arguments)]
fn add_face_block(block: &mut [f64], n: usize, ro: usize, co: usize, jump: &[f64], flux: &[f64], w: f64, sigma: f64) {
    for p in 0..n {
        let (jp, dp) = (jump[ro + p], flux[ro + p]);
        for q in 0..n {
            let (jq, dq) = (jump[co + q], flux[co + q]);
            block[p * n + q] += w * (-dq * jp - jq * dp + sigma * jq * jp);
        }
    }
}

/// Weak data term on one-sided faces of `cells`:
/// `sum_F eta gamma_F / h_F (g, w)_F - (g, k grad w . n)_F`.
///
/// `g(face, x)` supplies the data at the physical point `x` of a face.
pub fn boundary_term(
    space: &BrokenSpace,
    cells: &CellSet,
    faces: &[usize],
    eta: f64,
    g: &dyn Fn(usize, Point) -> f64,
) -> Result<Vec<f64>, SwipError> {
    let mut out = vec![0.0; space.n_local_dofs(cells)];
    add_boundary_term(space, cells, faces, eta, g, &mut out)?;
    Ok(out)
}

/// Accumulating variant of [`boundary_term`]; faces are visited in the
/// given order.
pub fn add_boundary_term(
    space: &BrokenSpace,
    cells: &CellSet,
    faces: &[usize],
    eta: f64,
    g: &dyn Fn(usize, Point) -> f64,
    out: &mut [f64],
) -> Result<(), SwipError> {
    add_boundary_term_indexed(space, cells, faces, eta, &|k, _, x| g(faces[k], x), out)
}

/// Like [`add_boundary_term`], but the data callback receives the position
/// of the face in `faces` and the index of the point in
/// [`face_quadrature`] besides the point itself.
pub fn add_boundary_term_indexed(
    space: &BrokenSpace,
    cells: &CellSet,
    faces: &[usize],
    eta: f64,
    g: &dyn Fn(usize, usize, Point) -> f64,
    out: &mut [f64],
) -> Result<(), SwipError> {
    let mesh = space.mesh();
    let n = space.dofs_per_cell();
    if out.len() != n * cells.len() {
        return Err(SwipError::ShapeMismatch {
            expected: n * cells.len(),
            got: out.len(),
        });
    }
    let mut vals = vec![0.0; n];
    let mut grads = vec![[0.0; 2]; n];
    for (k, &f) in faces.iter().enumerate() {
        let inside = inside_cell(mesh, cells, f)?;
        let kap = mesh.kappa(inside);
        let sigma = eta * kap / mesh.h_face(f);
        let nrm = outward_normal(mesh, f, inside);
        let i = cells.local_index(inside).unwrap();
        let block = &mut out[i * n..(i + 1) * n];
        for (q, (x, w)) in face_quadrature(space, f).into_iter().enumerate() {
            let gx = g(k, q, x);
            if gx == 0.0 {
                continue;
            }
            space.basis_at(inside, x, &mut vals, &mut grads);
            for p in 0..n {
                let dn = kap * (grads[p][0] * nrm[0] + grads[p][1] * nrm[1]);
                block[p] += w * (sigma * gx * vals[p] - gx * dn);
            }
        }
    }
    Ok(())
}

/// The cell of `cells` adjacent to a face with exactly one side in the set.
pub fn inside_cell(mesh: &Mesh, cells: &CellSet, f: usize) -> Result<usize, SwipError> {
    let face = mesh.face(f);
    match (cells.contains(face.owner), face.neighbor.map(|c| cells.contains(c))) {
        (true, Some(true)) => Err(SwipError::FaceNotOnBoundary { face: f }),
        (true, _) => Ok(face.owner),
        (false, Some(true)) => Ok(face.neighbor.unwrap()),
        _ => Err(SwipError::FaceOutsideSet { face: f }),
    }
}

/// Faces on the boundary of `cells` that carry a Dirichlet label.
pub fn dirichlet_faces_of(mesh: &Mesh, cells: &CellSet) -> Vec<usize> {
    let mut faces: Vec<usize> = cells
        .iter()
        .flat_map(|c| mesh.cell_faces(c))
        .filter(|&f| mesh.boundary_label(f) == Some(crate::mesh::BoundaryLabel::Dirichlet))
        .collect();
    faces.sort_unstable();
    faces.dedup();
    faces
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};
    use std::sync::Arc;

    fn setup(nx: usize, k: usize, dirichlet: bool) -> (BrokenSpace, SwipOperator) {
        let mut m = build_structured_mesh(nx, nx, Rect::unit()).unwrap();
        m.classify_boundary(|_| dirichlet);
        let m = Arc::new(m);
        let s = BrokenSpace::new(m.clone(), k);
        let cells = CellSet::all(m.n_cells());
        let op = assemble_swip(&s, &cells, &m.dirichlet_faces(), default_eta(k)).unwrap();
        (s, op)
    }

    #[test]
    fn exact_symmetry() {
        let (_, op) = setup(3, 2, true);
        let a = op.matrix();
        for i in 0..a.n() {
            for (j, v) in a.row(i) {
                assert_eq!(a.get(j, i), Some(v));
            }
        }
    }

    #[test]
    fn constants_in_neumann_kernel() {
        for k in 0..=3 {
            let (s, op) = setup(3, k, false);
            let one = s.project(&|_| 1.0);
            let r = op.apply_a(one.as_slice()).unwrap();
            let scale = op.matrix().norm_inf();
            assert!(r.iter().all(|x| x.abs() <= 1e-12 * scale), "k={k}");
            assert!(op.a_norm(one.as_slice()).unwrap() < 1e-6);
        }
    }

    #[test]
    fn harmonic_face_coefficients() {
        let mut m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        m.set_kappa(vec![1.0, 1.5]).unwrap();
        let f = (0..m.n_faces()).find(|&f| !m.face(f).is_boundary()).unwrap();
        let c = face_coefficients(&m, f);
        assert_eq!(c.gamma, 1.2);
        assert_eq!(c.omega, [0.6, 0.4]);
        let b = m.boundary_faces().next().unwrap();
        assert_eq!(face_coefficients(&m, b).omega, [1.0, 0.0]);
    }

    #[test]
    fn consistency_on_quadratic() {
        // u = x^2 + xy: -div grad u = -2
        let (s, op) = setup(4, 2, true);
        let exact = |p: Point| p[0] * p[0] + p[0] * p[1];
        let cells = CellSet::all(s.mesh().n_cells());
        let u = s.project(&exact);
        let au = op.apply_a(u.as_slice()).unwrap();
        let f = s.project(&|_| -2.0);
        let mass = s.mass_diag(&cells);
        let g = boundary_term(&s, &cells, &s.mesh().dirichlet_faces(), op.eta(), &|_, x| exact(x)).unwrap();
        let res: f64 = (0..au.len())
            .map(|i| (au[i] - mass[i] * f.as_slice()[i] - g[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn zero_data_term() {
        let (s, op) = setup(2, 1, true);
        let cells = CellSet::all(8);
        let g = boundary_term(&s, &cells, &s.mesh().dirichlet_faces(), op.eta(), &|_, _| 0.0).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn assembly_rejects_bad_faces() {
        let m = Arc::new(build_structured_mesh(2, 2, Rect::unit()).unwrap());
        let s = BrokenSpace::new(m.clone(), 1);
        let cells = CellSet::new(vec![0, 1]);
        let far = (0..m.n_faces())
            .find(|&f| m.face(f).is_boundary() && !cells.contains(m.face(f).owner))
            .unwrap();
        assert!(matches!(
            assemble_swip(&s, &cells, &[far], 8.0),
            Err(SwipError::FaceOutsideSet { .. })
        ));
        let inner = (0..m.n_faces())
            .find(|&f| m.face(f).owner == 0 && m.face(f).neighbor == Some(1))
            .unwrap();
        assert!(matches!(
            assemble_swip(&s, &cells, &[inner], 8.0),
            Err(SwipError::FaceNotOnBoundary { .. })
        ));
        assert!(assemble_swip(&s, &cells, &[], 0.0).is_err());
    }

    #[test]
    fn a_norm_properties() {
        let (s, op) = setup(3, 1, true);
        let z = vec![0.0; s.n_dofs()];
        assert_eq!(op.a_norm(&z).unwrap(), 0.0);
        let u: Vec<f64> = (0..s.n_dofs()).map(|i| ((i * 7 % 11) as f64).cos()).collect();
        let u2: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        let (a, b) = (op.a_norm(&u).unwrap(), op.a_norm(&u2).unwrap());
        assert!((b - 2.0 * a).abs() <= 1e-12 * b);
        assert!(op.a_norm(&[1.0]).is_err());
    }

    #[test]
    fn tiny_penalty_breaks_coercivity() {
        let mut m = build_structured_mesh(3, 3, Rect::unit()).unwrap();
        m.classify_boundary(|_| true);
        let m = Arc::new(m);
        let s = BrokenSpace::new(m.clone(), 2);
        let op = assemble_swip(&s, &CellSet::all(m.n_cells()), &m.dirichlet_faces(), 1e-3).unwrap();
        // some random vector has negative energy
        let neg = (0..50).any(|seed| {
            let u: Vec<f64> = (0..s.n_dofs()).map(|i| (((i + 1) * (seed + 3)) as f64 * 0.7).sin()).collect();
            op.a_norm(&u).is_err()
        });
        assert!(neg);
    }
}
