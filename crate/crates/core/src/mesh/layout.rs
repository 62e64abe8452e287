use std::collections::BTreeMap;

use super::{
    extend_cells, interface_cells, interface_faces, point_segment_distance, BoundaryLabel,
    CellSet, Mesh, MeshError,
};

/// Overlapping decomposition derived from a non-overlapping owner map.
///
/// Subdomain ids are 0-based.
#[derive(Debug, Clone)]
pub struct SubdomainLayout {
    pub n_subdomains: usize,
    pub layers: usize,
    /// Owning subdomain of every cell.
    pub owner: Vec<usize>,
    /// Non-overlapping subdomains.
    pub owned: Vec<CellSet>,
    /// Owned cells extended by `layers` layers.
    pub overlapped: Vec<CellSet>,
    /// Faces of the boundary of each overlapped subdomain that are interior
    /// to the mesh (the artificial interface), ascending.
    pub interfaces: Vec<Vec<usize>>,
    /// Cells of the whole mesh touching the interface of each subdomain.
    pub prediction: Vec<CellSet>,
    /// Dirichlet faces on the boundary of each overlapped subdomain.
    pub dirichlet_faces: Vec<Vec<usize>>,
    /// Non-empty pairwise overlaps, keyed by `(i, j)` with `i < j`.
    pub overlaps: BTreeMap<(usize, usize), CellSet>,
    /// Minimal physical width of the overlap regions; infinite when no
    /// subdomain has an interface.
    pub overlap_width: f64,
}

impl SubdomainLayout {
    pub fn overlap(&self, i: usize, j: usize) -> Option<&CellSet> {
        self.overlaps.get(&(i.min(j), i.max(j)))
    }
}

pub fn build_layout(mesh: &Mesh, owner: &[usize], layers: usize) -> Result<SubdomainLayout, MeshError> {
    if layers == 0 {
        return Err(MeshError::Layout("overlap needs at least one layer".into()));
    }
    if owner.len() != mesh.n_cells() {
        return Err(MeshError::Layout(format!(
            "owner map has {} entries for {} cells",
            owner.len(),
            mesh.n_cells()
        )));
    }
    let n_subdomains = owner.iter().copied().max().map_or(0, |m| m + 1);
    let mut owned_cells = vec![Vec::new(); n_subdomains];
    for (c, &o) in owner.iter().enumerate() {
        owned_cells[o].push(c);
    }
    if let Some(empty) = owned_cells.iter().position(Vec::is_empty) {
        return Err(MeshError::Layout(format!("subdomain {empty} owns no cells")));
    }
    let owned: Vec<CellSet> = owned_cells.into_iter().map(CellSet::new).collect();

    let overlapped: Vec<CellSet> = owned.iter().map(|o| extend_cells(mesh, o, layers)).collect();
    let interfaces: Vec<Vec<usize>> = overlapped.iter().map(|o| interface_faces(mesh, o)).collect();
    let prediction: Vec<CellSet> = interfaces.iter().map(|g| interface_cells(mesh, g)).collect();
    let dirichlet_faces = overlapped
        .iter()
        .map(|o| {
            let mut faces: Vec<usize> = o
                .iter()
                .flat_map(|c| mesh.cell_faces(c))
                .filter(|&f| mesh.boundary_label(f) == Some(BoundaryLabel::Dirichlet))
                .collect();
            faces.sort_unstable();
            faces.dedup();
            faces
        })
        .collect();

    for (i, o) in overlapped.iter().enumerate() {
        if n_subdomains > 1 && o.len() == mesh.n_cells() {
            log::warn!(
                "overlapped subdomain {i} covers the whole mesh; splitting degenerates to the global method there"
            );
        }
    }

    let mut overlaps = BTreeMap::new();
    for i in 0..n_subdomains {
        for j in i + 1..n_subdomains {
            let s = overlapped[i].intersection(&overlapped[j]);
            if !s.is_empty() {
                overlaps.insert((i, j), s);
            }
        }
    }

    let overlap_width = (0..n_subdomains)
        .map(|i| overlap_width(mesh, &owned[i], &interfaces[i]))
        .fold(f64::INFINITY, f64::min);

    Ok(SubdomainLayout {
        n_subdomains,
        layers,
        owner: owner.to_vec(),
        owned,
        overlapped,
        interfaces,
        prediction,
        dirichlet_faces,
        overlaps,
        overlap_width,
    })
}

/// Smallest distance from a vertex of the artificial interface to the
/// interior boundary of the owned region.
fn overlap_width(mesh: &Mesh, owned: &CellSet, interface: &[usize]) -> f64 {
    if interface.is_empty() {
        return f64::INFINITY;
    }
    let inner = interface_faces(mesh, owned);
    let mut verts: Vec<usize> = interface.iter().flat_map(|&f| mesh.face(f).vertices).collect();
    verts.sort_unstable();
    verts.dedup();
    let mut width = f64::INFINITY;
    for v in verts {
        let p = mesh.vertex(v);
        for &f in &inner {
            let [a, b] = mesh.face(f).vertices.map(|w| mesh.vertex(w));
            width = width.min(point_segment_distance(p, a, b));
        }
    }
    width
}
