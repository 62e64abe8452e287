//! Broken polynomial spaces on triangle meshes.
//!
//! Every cell carries the same orthonormal modal basis of `P_k` pulled back
//! through the affine cell map, so the mass matrix is diagonal with entry
//! `|det J_K|` for each dof of cell `K`.
//!
//! Vectors over a [`CellSet`] use the set's local numbering: the dofs of the
//! `i`-th cell of the set occupy block `i`. For the full mesh that is the
//! global numbering.

mod basis;
pub mod quadrature;

pub use basis::ReferenceBasis;
pub use quadrature::{GaussRule, QuadratureRule};

use std::ops::Range;
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{CellSet, Mesh, Point};

#[derive(Debug, Error)]
pub enum DgError {
    #[error("point ({x}, {y}) is outside cell {cell}")]
    PointOutsideCell { cell: usize, x: f64, y: f64 },
    #[error("vector length {got} does not match the space ({expected} dofs)")]
    SpaceMismatch { expected: usize, got: usize },
    #[error("cell {cell} has a singular mass block")]
    SingularMass { cell: usize },
}

/// Affine map `x = origin + J xi` from the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    inv: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn new([p0, p1, p2]: [Point; 3]) -> Self {
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = if det != 0.0 {
            [
                [jac[1][1] / det, -jac[0][1] / det],
                [-jac[1][0] / det, jac[0][0] / det],
            ]
        } else {
            [[0.0; 2]; 2]
        };
        Self {
            origin: p0,
            jac,
            det,
            inv,
        }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Physical gradient `J^{-T} g` of a reference gradient `g`.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }
}

/// Broken space `P_k` over all cells of a mesh.
#[derive(Debug, Clone)]
pub struct BrokenSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    basis: ReferenceBasis,
    volume_rule: QuadratureRule,
    projection_rule: QuadratureRule,
    face_rule: GaussRule,
    geometry: Vec<CellGeometry>,
    volume_values: Vec<Vec<f64>>,
    volume_grads: Vec<Vec<[f64; 2]>>,
    projection_values: Vec<Vec<f64>>,
}

impl BrokenSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Self {
        let basis = ReferenceBasis::new(degree);
        let n = basis.len();
        let volume_rule = QuadratureRule::triangle((2 * degree + 2).max(5));
        let projection_rule = QuadratureRule::triangle(2 * degree + 4);
        let face_rule = GaussRule::with_exactness(2 * degree + 2);
        let geometry = (0..mesh.n_cells())
            .map(|c| CellGeometry::new(mesh.cell_points(c)))
            .collect();
        let tabulate = |rule: &QuadratureRule| -> Vec<Vec<f64>> {
            rule.points
                .iter()
                .map(|&p| {
                    let mut v = vec![0.0; n];
                    basis.eval(p, &mut v);
                    v
                })
                .collect()
        };
        let volume_values = tabulate(&volume_rule);
        let projection_values = tabulate(&projection_rule);
        let volume_grads = volume_rule
            .points
            .iter()
            .map(|&p| {
                let mut g = vec![[0.0; 2]; n];
                basis.grad(p, &mut g);
                g
            })
            .collect();
        Self {
            mesh,
            degree,
            basis,
            volume_rule,
            projection_rule,
            face_rule,
            geometry,
            volume_values,
            volume_grads,
            projection_values,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.basis.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.basis.len() * self.mesh.n_cells()
    }

    /// Number of dofs of a vector over `cells`.
    pub fn n_local_dofs(&self, cells: &CellSet) -> usize {
        self.basis.len() * cells.len()
    }

    pub fn basis(&self) -> &ReferenceBasis {
        &self.basis
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    pub fn volume_rule(&self) -> &QuadratureRule {
        &self.volume_rule
    }

    pub fn face_rule(&self) -> &GaussRule {
        &self.face_rule
    }

    /// Basis values at the points of [`Self::volume_rule`].
    pub fn volume_values(&self) -> &[Vec<f64>] {
        &self.volume_values
    }

    /// Reference basis gradients at the points of [`Self::volume_rule`].
    pub fn volume_grads(&self) -> &[Vec<[f64; 2]>] {
        &self.volume_grads
    }

    /// Global dof range of a cell.
    pub fn cell_dofs(&self, cell: usize) -> Range<usize> {
        let n = self.basis.len();
        cell * n..(cell + 1) * n
    }

    /// Diagonal of the mass matrix for a cell.
    pub fn mass_value(&self, cell: usize) -> f64 {
        self.geometry[cell].det.abs()
    }

    /// Diagonal of the mass matrix over `cells`, local numbering.
    pub fn mass_diag(&self, cells: &CellSet) -> Vec<f64> {
        let n = self.basis.len();
        cells.iter().flat_map(|c| std::iter::repeat_n(self.mass_value(c), n)).collect()
    }

    /// L2 projection of `f` onto `P_k(K)`, written to `out`.
    ///
    /// With the orthonormal basis the cell mass matrix is `|det J| I`, which
    /// cancels against the Jacobian of the load integral.
    pub fn project_cell(&self, cell: usize, f: &dyn Fn(Point) -> f64, out: &mut [f64]) {
        out.fill(0.0);
        let geo = &self.geometry[cell];
        for ((p, w), vals) in self
            .projection_rule
            .points
            .iter()
            .zip(&self.projection_rule.weights)
            .zip(&self.projection_values)
        {
            let fx = w * f(geo.to_physical(*p));
            for (o, v) in out.iter_mut().zip(vals) {
                *o += fx * v;
            }
        }
    }

    /// Local L2 projection over a cell set.
    pub fn project_on(&self, cells: &CellSet, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
        let n = self.basis.len();
        let mut out = vec![0.0; n * cells.len()];
        for (block, c) in out.chunks_mut(n).zip(cells.iter()) {
            self.project_cell(c, f, block);
        }
        out
    }

    pub fn project(&self, f: &dyn Fn(Point) -> f64) -> Field {
        Field::new(self.project_on(&CellSet::all(self.mesh.n_cells()), f))
    }

    /// Value of the polynomial with coefficients `block` on `cell` at the
    /// physical point `x` (no containment check).
    pub fn eval_block(&self, cell: usize, block: &[f64], x: Point) -> f64 {
        let mut vals = vec![0.0; self.basis.len()];
        self.basis.eval(self.geometry[cell].to_reference(x), &mut vals);
        block.iter().zip(&vals).map(|(a, b)| a * b).sum()
    }

    /// Basis values and physical gradients of `cell` at the physical point `x`.
    pub fn basis_at(&self, cell: usize, x: Point, vals: &mut [f64], grads: &mut [[f64; 2]]) {
        let geo = &self.geometry[cell];
        let xi = geo.to_reference(x);
        self.basis.eval(xi, vals);
        self.basis.grad(xi, grads);
        for g in grads.iter_mut() {
            *g = geo.push_gradient(*g);
        }
    }

    /// Evaluates a global field on `cell` at the physical point `x`.
    pub fn evaluate(&self, field: &Field, cell: usize, x: Point) -> Result<f64, DgError> {
        self.check(field.as_slice())?;
        let bary = self.mesh.barycentric(cell, x);
        if bary.iter().any(|&l| !(-1e-10..=1.0 + 1e-10).contains(&l)) {
            return Err(DgError::PointOutsideCell {
                cell,
                x: x[0],
                y: x[1],
            });
        }
        Ok(self.eval_block(cell, &field.as_slice()[self.cell_dofs(cell)], x))
    }

    /// `M^{-1} rhs` over `cells`.
    pub fn mass_solve(&self, cells: &CellSet, rhs: &[f64]) -> Result<Vec<f64>, DgError> {
        self.check_local(cells, rhs)?;
        let n = self.basis.len();
        let mut out = Vec::with_capacity(rhs.len());
        for (block, c) in rhs.chunks(n).zip(cells.iter()) {
            let m = self.mass_value(c);
            if m == 0.0 {
                return Err(DgError::SingularMass { cell: c });
            }
            out.extend(block.iter().map(|r| r / m));
        }
        Ok(out)
    }

    /// `(a, b)_{L2}` of two vectors over `cells`.
    pub fn l2_inner_on(&self, cells: &CellSet, a: &[f64], b: &[f64]) -> Result<f64, DgError> {
        self.check_local(cells, a)?;
        self.check_local(cells, b)?;
        let n = self.basis.len();
        let mut total = 0.0;
        for ((ba, bb), c) in a.chunks(n).zip(b.chunks(n)).zip(cells.iter()) {
            let s: f64 = ba.iter().zip(bb).map(|(x, y)| x * y).sum();
            total += self.mass_value(c) * s;
        }
        Ok(total)
    }

    pub fn l2_inner(&self, a: &Field, b: &Field) -> Result<f64, DgError> {
        self.l2_inner_on(&CellSet::all(self.mesh.n_cells()), a.as_slice(), b.as_slice())
    }

    pub fn l2_norm(&self, a: &Field) -> Result<f64, DgError> {
        Ok(self.l2_inner(a, a)?.max(0.0).sqrt())
    }

    pub fn l2_norm_on(&self, cells: &CellSet, a: &[f64]) -> Result<f64, DgError> {
        Ok(self.l2_inner_on(cells, a, a)?.max(0.0).sqrt())
    }

    fn check(&self, v: &[f64]) -> Result<(), DgError> {
        if v.len() != self.n_dofs() {
            return Err(DgError::SpaceMismatch {
                expected: self.n_dofs(),
                got: v.len(),
            });
        }
        Ok(())
    }

    fn check_local(&self, cells: &CellSet, v: &[f64]) -> Result<(), DgError> {
        let expected = self.n_local_dofs(cells);
        if v.len() != expected {
            return Err(DgError::SpaceMismatch {
                expected,
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// Coefficient vector of a function in the global broken space.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(space: &BrokenSpace) -> Self {
        Self(vec![0.0; space.n_dofs()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sub-vector of the dof blocks of `cells`.
    pub fn restrict(&self, space: &BrokenSpace, cells: &CellSet) -> Vec<f64> {
        let mut out = Vec::with_capacity(space.n_local_dofs(cells));
        for c in cells.iter() {
            out.extend_from_slice(&self.0[space.cell_dofs(c)]);
        }
        out
    }

    /// Field that equals `local` on `cells` and zero elsewhere.
    pub fn extend_from(space: &BrokenSpace, cells: &CellSet, local: &[f64]) -> Self {
        let n = space.dofs_per_cell();
        let mut out = vec![0.0; space.n_dofs()];
        for (block, c) in local.chunks(n).zip(cells.iter()) {
            out[space.cell_dofs(c)].copy_from_slice(block);
        }
        Self(out)
    }
}
