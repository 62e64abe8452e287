//! Simplicial 2D meshes with face topology, boundary labels and a
//! piecewise-constant coefficient.

mod cellset;
mod layout;
pub mod msh;
mod partition;
mod topology;

pub use cellset::CellSet;
pub use layout::{build_layout, SubdomainLayout};
pub use partition::partition_cells;
pub use topology::{extend_cells, interface_cells, interface_faces};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("degenerate extent [{x0}, {x1}] x [{y0}, {y1}]")]
    DegenerateExtent { x0: f64, y0: f64, x1: f64, y1: f64 },
    #[error("grid dimensions must be positive (nx = {nx}, ny = {ny})")]
    EmptyGrid { nx: usize, ny: usize },
    #[error("cell {cell} has zero area")]
    DegenerateCell { cell: usize },
    #[error("cell {cell} references vertex {vertex} but the mesh has {count} vertices")]
    VertexOutOfRange { cell: usize, vertex: usize, count: usize },
    #[error("edge ({0}, {1}) is shared by more than two cells")]
    NonManifoldEdge(usize, usize),
    #[error("kappa must be positive and finite, got {value} on cell {cell}")]
    InvalidKappa { cell: usize, value: f64 },
    #[error("kappa vector has length {got}, expected {expected}")]
    KappaLength { got: usize, expected: usize },
    #[error("msh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported msh element type {element_type} at line {line}")]
    UnsupportedElement { line: usize, element_type: i64 },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Boundary condition type of a boundary face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryLabel {
    Dirichlet,
    Neumann,
}

/// An edge of the triangulation.
///
/// `owner` is the lower-indexed incident cell; the face normal used for
/// jumps points from `owner` to `neighbor`.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// Vertex indices, ascending.
    pub vertices: [usize; 2],
    pub owner: usize,
    pub neighbor: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }

    /// The incident cell other than `cell`, if any.
    pub fn other(&self, cell: usize) -> Option<usize> {
        if cell == self.owner {
            self.neighbor
        } else if Some(cell) == self.neighbor {
            Some(self.owner)
        } else {
            None
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    faces: Vec<Face>,
    cell_faces: Vec<[usize; 3]>,
    boundary_label: Vec<Option<BoundaryLabel>>,
    face_tag: Vec<i32>,
    cell_tag: Vec<i32>,
    kappa: Vec<f64>,
    h_cell: Vec<f64>,
    h_face: Vec<f64>,
    vertex_cells: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds the face topology of a triangle soup.
    ///
    /// Cells are reoriented counter-clockwise. Faces are numbered in order of
    /// first appearance (cell order, then local edge order). All boundary
    /// faces start out Neumann with tag 0, and kappa is 1 everywhere.
    pub fn new(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        cell_tag: Vec<i32>,
    ) -> Result<Self, MeshError> {
        assert_eq!(cells.len(), cell_tag.len(), "one tag per cell");
        let nv = vertices.len();
        let mut cells = cells;
        for (c, cell) in cells.iter_mut().enumerate() {
            for &v in cell.iter() {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange {
                        cell: c,
                        vertex: v,
                        count: nv,
                    });
                }
            }
            let area2 = signed_area2(&vertices, cell);
            if area2.abs() <= f64::EPSILON * bbox_scale(&vertices, cell).powi(2) {
                return Err(MeshError::DegenerateCell { cell: c });
            }
            if area2 < 0.0 {
                cell.swap(1, 2);
            }
        }

        let mut faces: Vec<Face> = Vec::with_capacity(cells.len() * 3 / 2 + 1);
        let mut cell_faces = vec![[usize::MAX; 3]; cells.len()];
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(cells.len() * 2);
        for (c, cell) in cells.iter().enumerate() {
            for local in 0..3 {
                // edge opposite local vertex `local`
                let a = cell[(local + 1) % 3];
                let b = cell[(local + 2) % 3];
                let key = (a.min(b), a.max(b));
                let f = match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.neighbor.is_some() {
                            return Err(MeshError::NonManifoldEdge(key.0, key.1));
                        }
                        // cells are visited in ascending order, so the first
                        // visitor is the lower index
                        face.neighbor = Some(c);
                        f
                    }
                    None => {
                        let f = faces.len();
                        faces.push(Face {
                            vertices: [key.0, key.1],
                            owner: c,
                            neighbor: None,
                        });
                        lookup.insert(key, f);
                        f
                    }
                };
                cell_faces[c][local] = f;
            }
        }

        let boundary_label = faces
            .iter()
            .map(|f| f.is_boundary().then_some(BoundaryLabel::Neumann))
            .collect();
        let h_face = faces
            .iter()
            .map(|f| dist(vertices[f.vertices[0]], vertices[f.vertices[1]]))
            .collect();
        let h_cell = cells
            .iter()
            .map(|cell| {
                let [a, b, c] = cell.map(|v| vertices[v]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .collect();
        let mut vertex_cells = vec![Vec::new(); nv];
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                vertex_cells[v].push(c);
            }
        }
        let nf = faces.len();
        let nc = cells.len();
        Ok(Self {
            vertices,
            cells,
            faces,
            cell_faces,
            boundary_label,
            face_tag: vec![0; nf],
            cell_tag,
            kappa: vec![1.0; nc],
            h_cell,
            h_face,
            vertex_cells,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> [usize; 3] {
        self.cells[c]
    }

    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        self.cells[c].map(|v| self.vertices[v])
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    /// Faces of a cell; entry `i` is the edge opposite local vertex `i`.
    pub fn cell_faces(&self, c: usize) -> [usize; 3] {
        self.cell_faces[c]
    }

    /// Cells that have `v` as a vertex.
    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }

    pub fn kappa(&self, c: usize) -> f64 {
        self.kappa[c]
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappa
    }

    pub fn cell_tag(&self, c: usize) -> i32 {
        self.cell_tag[c]
    }

    pub fn cell_tags(&self) -> &[i32] {
        &self.cell_tag
    }

    pub fn face_tag(&self, f: usize) -> i32 {
        self.face_tag[f]
    }

    pub fn set_face_tag(&mut self, f: usize, tag: i32) {
        self.face_tag[f] = tag;
    }

    /// `None` for interior faces.
    pub fn boundary_label(&self, f: usize) -> Option<BoundaryLabel> {
        self.boundary_label[f]
    }

    pub fn h_cell(&self, c: usize) -> f64 {
        self.h_cell[c]
    }

    pub fn h_face(&self, f: usize) -> f64 {
        self.h_face[f]
    }

    /// Maximal cell diameter.
    pub fn h_max(&self) -> f64 {
        self.h_cell.iter().copied().fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.h_cell.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn centroid(&self, c: usize) -> Point {
        let [a, b, d] = self.cell_points(c);
        [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]
    }

    pub fn face_midpoint(&self, f: usize) -> Point {
        let [a, b] = self.faces[f].vertices.map(|v| self.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        0.5 * signed_area2(&self.vertices, &self.cells[c])
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| self.faces[f].is_boundary())
    }

    pub fn dirichlet_faces(&self) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&f| self.boundary_label[f] == Some(BoundaryLabel::Dirichlet))
            .collect()
    }

    /// Labels every boundary face: `Dirichlet` where the predicate holds at
    /// the face midpoint, `Neumann` elsewhere.
    pub fn classify_boundary(&mut self, dirichlet: impl Fn(Point) -> bool) {
        for f in 0..self.faces.len() {
            if self.faces[f].is_boundary() {
                let label = if dirichlet(self.face_midpoint(f)) {
                    BoundaryLabel::Dirichlet
                } else {
                    BoundaryLabel::Neumann
                };
                self.boundary_label[f] = Some(label);
            }
        }
    }

    /// Labels boundary faces by their physical tag.
    pub fn classify_boundary_by_tag(&mut self, dirichlet_tags: &[i32]) {
        for f in 0..self.faces.len() {
            if self.faces[f].is_boundary() {
                let label = if dirichlet_tags.contains(&self.face_tag[f]) {
                    BoundaryLabel::Dirichlet
                } else {
                    BoundaryLabel::Neumann
                };
                self.boundary_label[f] = Some(label);
            }
        }
    }

    pub fn set_kappa(&mut self, kappa: Vec<f64>) -> Result<(), MeshError> {
        if kappa.len() != self.cells.len() {
            return Err(MeshError::KappaLength {
                got: kappa.len(),
                expected: self.cells.len(),
            });
        }
        if let Some((cell, &value)) = kappa
            .iter()
            .enumerate()
            .find(|(_, k)| !(k.is_finite() && **k > 0.0))
        {
            return Err(MeshError::InvalidKappa { cell, value });
        }
        self.kappa = kappa;
        Ok(())
    }

    /// Sets kappa from the cell physical tags; unmapped tags get `default`.
    pub fn set_kappa_by_tag(&mut self, map: &HashMap<i32, f64>, default: f64) -> Result<(), MeshError> {
        let kappa = self
            .cell_tag
            .iter()
            .map(|t| map.get(t).copied().unwrap_or(default))
            .collect();
        self.set_kappa(kappa)
    }

    /// Samples a spatially varying coefficient at cell centroids.
    pub fn sample_kappa(&mut self, kappa: impl Fn(Point) -> f64) -> Result<(), MeshError> {
        let values = (0..self.n_cells()).map(|c| kappa(self.centroid(c))).collect();
        self.set_kappa(values)
    }

    /// Bounds `(min, max)` of kappa over the mesh.
    pub fn kappa_bounds(&self) -> (f64, f64) {
        self.kappa
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &k| (lo.min(k), hi.max(k)))
    }

    /// Uniform red refinement: every triangle is split into four through its
    /// edge midpoints. Child `4c + j` is the `j`-th child of cell `c`
    /// (`j < 3` the corner children, `j = 3` the middle one). Kappa, cell
    /// tags, boundary labels and boundary tags are inherited.
    pub fn refine_uniform(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint = vec![0usize; self.faces.len()];
        for (f, face) in self.faces.iter().enumerate() {
            let [a, b] = face.vertices.map(|v| self.vertices[v]);
            midpoint[f] = vertices.len();
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        let mut tags = Vec::with_capacity(4 * self.cells.len());
        for (c, cell) in self.cells.iter().enumerate() {
            let [f0, f1, f2] = self.cell_faces[c];
            let (m0, m1, m2) = (midpoint[f0], midpoint[f1], midpoint[f2]);
            let [v0, v1, v2] = *cell;
            cells.push([v0, m2, m1]);
            cells.push([m2, v1, m0]);
            cells.push([m1, m0, v2]);
            cells.push([m0, m1, m2]);
            tags.extend([self.cell_tag[c]; 4]);
        }
        let mut fine = Mesh::new(vertices, cells, tags).expect("refinement of a valid mesh");
        fine.kappa = self.kappa.iter().flat_map(|&k| [k; 4]).collect();
        for f in 0..fine.faces.len() {
            if !fine.faces[f].is_boundary() {
                continue;
            }
            // a fine boundary face lies on exactly one coarse boundary face of
            // its parent cell
            let parent = fine.faces[f].owner / 4;
            let mid = fine.face_midpoint(f);
            let coarse = self.cell_faces[parent]
                .into_iter()
                .filter(|&cf| self.faces[cf].is_boundary())
                .min_by(|&x, &y| {
                    self.point_face_distance(mid, x)
                        .total_cmp(&self.point_face_distance(mid, y))
                })
                .expect("boundary child face has a boundary parent face");
            fine.boundary_label[f] = self.boundary_label[coarse];
            fine.face_tag[f] = self.face_tag[coarse];
        }
        fine
    }

    /// Euclidean distance from a point to the segment of face `f`.
    pub fn point_face_distance(&self, p: Point, f: usize) -> f64 {
        let [a, b] = self.faces[f].vertices.map(|v| self.vertices[v]);
        point_segment_distance(p, a, b)
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, p: Point) -> [f64; 3] {
        let [a, b, d] = self.cell_points(c);
        let det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }
}

/// Uniform triangulation of a rectangle: `nx * ny` squares, each split into
/// two triangles along the diagonal from its lower-left to upper-right corner.
pub fn build_structured_mesh(nx: usize, ny: usize, extent: Rect) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::EmptyGrid { nx, ny });
    }
    let Rect { x0, y0, x1, y1 } = extent;
    if !(x1 > x0 && y1 > y0) || !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
        return Err(MeshError::DegenerateExtent { x0, y0, x1, y1 });
    }
    let dx = (x1 - x0) / nx as f64;
    let dy = (y1 - y0) / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { x1 } else { x0 + i as f64 * dx };
            let y = if j == ny { y1 } else { y0 + j as f64 * dy };
            vertices.push([x, y]);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            cells.push([a, b, c]);
            cells.push([a, c, d]);
        }
    }
    let n = cells.len();
    Mesh::new(vertices, cells, vec![1; n])
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let t = [b[0] - a[0], b[1] - a[1]];
    let len2 = t[0] * t[0] + t[1] * t[1];
    let s = (((p[0] - a[0]) * t[0] + (p[1] - a[1]) * t[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + s * t[0], a[1] + s * t[1]])
}

fn signed_area2(vertices: &[Point], cell: &[usize; 3]) -> f64 {
    let [a, b, c] = cell.map(|v| vertices[v]);
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

fn bbox_scale(vertices: &[Point], cell: &[usize; 3]) -> f64 {
    let [a, b, c] = cell.map(|v| vertices[v]);
    dist(a, b).max(dist(b, c)).max(dist(c, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_structured_mesh() {
        let m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.n_faces(), 5);
        assert_eq!(m.faces().iter().filter(|f| !f.is_boundary()).count(), 1);
    }

    #[test]
    fn two_by_one_face_count() {
        let m = build_structured_mesh(2, 1, Rect::unit()).unwrap();
        assert_eq!(m.n_cells(), 4);
        assert_eq!(m.n_faces(), 9);
        assert_eq!(m.faces().iter().filter(|f| !f.is_boundary()).count(), 3);
    }

    #[test]
    fn euler_characteristic_of_rectangles() {
        for (nx, ny) in [(1, 1), (3, 2), (5, 7), (16, 4)] {
            let m = build_structured_mesh(nx, ny, Rect::new(-1.0, 0.0, 2.0, 0.5)).unwrap();
            assert_eq!(m.n_cells(), 2 * nx * ny);
            let chi = m.n_vertices() as i64 - m.n_faces() as i64 + m.n_cells() as i64;
            assert_eq!(chi, 1);
            for f in m.faces() {
                if let Some(n) = f.neighbor {
                    assert!(f.owner < n);
                }
            }
        }
    }

    #[test]
    fn rejects_degenerate_extent() {
        assert!(matches!(
            build_structured_mesh(2, 2, Rect::new(0.0, 0.0, 0.0, 1.0)),
            Err(MeshError::DegenerateExtent { .. })
        ));
        assert!(matches!(
            build_structured_mesh(0, 2, Rect::unit()),
            Err(MeshError::EmptyGrid { .. })
        ));
    }

    #[test]
    fn cells_are_counter_clockwise() {
        let verts = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        let m = Mesh::new(verts, vec![[0, 1, 2]], vec![0]).unwrap();
        assert!(m.cell_area(0) > 0.0);
    }

    #[test]
    fn classify_left_edge() {
        let mut m = build_structured_mesh(4, 4, Rect::unit()).unwrap();
        m.classify_boundary(|p| p[0].abs() < 1e-12);
        let dirichlet = m.dirichlet_faces();
        assert_eq!(dirichlet.len(), 4);
        for f in &dirichlet {
            assert!(m.face_midpoint(*f)[0].abs() < 1e-12);
        }
        let neumann = m
            .boundary_faces()
            .filter(|&f| m.boundary_label(f) == Some(BoundaryLabel::Neumann))
            .count();
        assert_eq!(neumann, 12);

        m.classify_boundary(|_| false);
        assert!(m.dirichlet_faces().is_empty());
        m.classify_boundary(|_| true);
        assert_eq!(m.dirichlet_faces().len(), 16);
    }

    #[test]
    fn kappa_validation() {
        let mut m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        assert!(m.set_kappa(vec![1.0, 0.0]).is_err());
        assert!(m.set_kappa(vec![1.0]).is_err());
        m.set_kappa(vec![1.0, 1.5]).unwrap();
        assert_eq!(m.kappa_bounds(), (1.0, 1.5));
    }

    #[test]
    fn refinement_inherits_data() {
        let mut m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        m.classify_boundary(|p| p[0] < 1e-12);
        m.sample_kappa(|p| if p[0] < 0.5 { 1.0 } else { 2.0 }).unwrap();
        let fine = m.refine_uniform();
        assert_eq!(fine.n_cells(), 4 * m.n_cells());
        let area: f64 = (0..fine.n_cells()).map(|c| fine.cell_area(c)).sum();
        assert!((area - 1.0).abs() < 1e-14);
        for c in 0..fine.n_cells() {
            assert_eq!(fine.kappa(c), m.kappa(c / 4));
            let bary = m.barycentric(c / 4, fine.centroid(c));
            assert!(bary.iter().all(|&l| l > 0.0));
        }
        assert_eq!(fine.dirichlet_faces().len(), 2 * m.dirichlet_faces().len());
        assert!((fine.h_max() - 0.5 * m.h_max()).abs() < 1e-14);
    }
}
