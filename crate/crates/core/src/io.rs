//! Output writers: VTK legacy ASCII, coefficient CSV and Matrix Market.

use std::fmt::Write as _;
use std::path::Path;

use crate::dg::BrokenSpace;
use crate::linalg::SparseSymMatrix;

/// Point data sampled per cell at the cell vertices.
pub struct VtkField<'a> {
    pub name: &'a str,
    /// Global coefficient vector.
    pub coeffs: &'a [f64],
}

/// VTK legacy unstructured grid with every cell's vertices duplicated, so
/// discontinuous fields are shown as they are. Each field is sampled at
/// the vertices; the cell wave speed is written as cell data.
pub fn format_vtk(space: &BrokenSpace, title: &str, fields: &[VtkField]) -> String {
    let mesh = space.mesh();
    let nc = mesh.n_cells();
    let n = space.dofs_per_cell();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", 3 * nc);
    for c in 0..nc {
        for p in mesh.cell_points(c) {
            let _ = writeln!(out, "{:e} {:e} 0", p[0], p[1]);
        }
    }
    let _ = writeln!(out, "CELLS {} {}", nc, 4 * nc);
    for c in 0..nc {
        let _ = writeln!(out, "3 {} {} {}", 3 * c, 3 * c + 1, 3 * c + 2);
    }
    let _ = writeln!(out, "CELL_TYPES {nc}");
    for _ in 0..nc {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "CELL_DATA {nc}\nSCALARS kappa double 1\nLOOKUP_TABLE default");
    for c in 0..nc {
        let _ = writeln!(out, "{:e}", mesh.kappa(c));
    }
    if !fields.is_empty() {
        let _ = writeln!(out, "POINT_DATA {}", 3 * nc);
    }
    for f in fields {
        let _ = writeln!(out, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name);
        for c in 0..nc {
            let block = &f.coeffs[c * n..(c + 1) * n];
            for p in mesh.cell_points(c) {
                let _ = writeln!(out, "{:e}", space.eval_block(c, block, p));
            }
        }
    }
    out
}

pub fn write_vtk(path: impl AsRef<Path>, space: &BrokenSpace, title: &str, fields: &[VtkField]) -> std::io::Result<()> {
    std::fs::write(path, format_vtk(space, title, fields))
}

/// One row per dof: `cell,local,u,v`.
pub fn format_coefficients_csv(space: &BrokenSpace, u: &[f64], v: &[f64]) -> String {
    let n = space.dofs_per_cell();
    let mut out = String::from("cell,local,u,v\n");
    for (d, (a, b)) in u.iter().zip(v).enumerate() {
        let _ = writeln!(out, "{},{},{:e},{:e}", d / n, d % n, a, b);
    }
    out
}

/// Reads the `u` and `v` columns written by [`format_coefficients_csv`].
pub fn parse_coefficients_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "cell,local,u,v" => {}
        _ => return Err("missing header `cell,local,u,v`".into()),
    }
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(format!("line {}: expected 4 columns", i + 1));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1));
        u.push(num(cols[2])?);
        v.push(num(cols[3])?);
    }
    Ok((u, v))
}

/// Matrix Market coordinate format, symmetric, lower triangle.
pub fn format_matrix_market(a: &SparseSymMatrix) -> String {
    let entries: Vec<(usize, usize, f64)> = (0..a.n())
        .flat_map(|i| a.row(i).filter(move |&(j, _)| j <= i).map(move |(j, v)| (i, j, v)))
        .collect();
    let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(out, "{} {} {}", a.n(), a.n(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &SparseSymMatrix) -> std::io::Result<()> {
    std::fs::write(path, format_matrix_market(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};
    use std::sync::Arc;

    #[test]
    fn vtk_layout() {
        let s = BrokenSpace::new(Arc::new(build_structured_mesh(1, 1, Rect::unit()).unwrap()), 1);
        let u = s.project(&|p| p[0] + p[1]);
        let text = format_vtk(&s, "test", &[VtkField { name: "u", coeffs: u.as_slice() }]);
        assert!(text.contains("POINTS 6 double"));
        assert!(text.contains("CELLS 2 8"));
        assert!(text.contains("POINT_DATA 6"));
        let lines: Vec<&str> = text.lines().collect();
        let start = lines.iter().position(|l| l.starts_with("SCALARS u")).unwrap() + 2;
        // first cell is (0,0), (1,0), (1,1)
        let vals: Vec<f64> = lines[start..start + 3].iter().map(|l| l.parse().unwrap()).collect();
        for (v, e) in vals.iter().zip([0.0, 1.0, 2.0]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_market_lower_triangle() {
        let a = SparseSymMatrix::from_upper_triplets(2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 1, 2.0)]).unwrap();
        let text = format_matrix_market(&a);
        assert_eq!(text.lines().nth(1), Some("2 2 3"));
        assert!(text.contains("2 1 -1e0"));
    }

    #[test]
    fn coefficient_csv() {
        let s = BrokenSpace::new(Arc::new(build_structured_mesh(1, 1, Rect::unit()).unwrap()), 0);
        let text = format_coefficients_csv(&s, &[1.0, 2.0], &[0.0, 0.5]);
        assert_eq!(text, "cell,local,u,v\n0,0,1e0,0e0\n1,0,2e0,5e-1\n");
        assert_eq!(parse_coefficients_csv(&text).unwrap(), (vec![1.0, 2.0], vec![0.0, 0.5]));
        assert!(parse_coefficients_csv("u,v\n").is_err());
    }
}
