use super::{CellSet, Mesh};

/// Extension of a cell set by `layers` layers: each layer adds every cell
/// whose closure meets the closure of a cell of the previous layer. On a
/// matching triangulation that is exactly vertex adjacency.
pub fn extend_cells(mesh: &Mesh, base: &CellSet, layers: usize) -> CellSet {
    let mut mask = base.mask(mesh.n_cells());
    let mut frontier: Vec<usize> = base.iter().collect();
    for _ in 0..layers {
        let mut next = Vec::new();
        for &c in &frontier {
            for v in mesh.cell(c) {
                for &k in mesh.vertex_cells(v) {
                    if !mask[k] {
                        mask[k] = true;
                        next.push(k);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    CellSet::from_mask(&mask)
}

/// All cells of the mesh whose closure meets one of the given faces, i.e.
/// cells sharing a face or a corner with the face set.
pub fn interface_cells(mesh: &Mesh, faces: &[usize]) -> CellSet {
    let mut mask = vec![false; mesh.n_cells()];
    for &f in faces {
        for v in mesh.face(f).vertices {
            for &k in mesh.vertex_cells(v) {
                mask[k] = true;
            }
        }
    }
    CellSet::from_mask(&mask)
}

/// Faces of the boundary of a cell set that are interior to the mesh,
/// ascending.
pub fn interface_faces(mesh: &Mesh, cells: &CellSet) -> Vec<usize> {
    let mask = cells.mask(mesh.n_cells());
    mesh.faces()
        .iter()
        .enumerate()
        .filter_map(|(f, face)| {
            let n = face.neighbor?;
            (mask[face.owner] != mask[n]).then_some(f)
        })
        .collect()
}
