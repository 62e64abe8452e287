#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use dgsplit::dg::BrokenSpace;
use dgsplit::integrators::ProblemData;
use dgsplit::mesh::{build_layout, build_structured_mesh, partition_cells, Mesh, Rect, SubdomainLayout};

/// Unit square, `n x n` squares, Dirichlet everywhere.
pub fn unit_square(n: usize) -> Mesh {
    let mut m = build_structured_mesh(n, n, Rect::unit()).unwrap();
    m.classify_boundary(|_| true);
    m
}

pub fn space(mesh: Mesh, degree: usize) -> Arc<BrokenSpace> {
    Arc::new(BrokenSpace::new(Arc::new(mesh), degree))
}

pub fn layout(mesh: &Mesh, parts: usize, layers: usize) -> Arc<SubdomainLayout> {
    let owner = partition_cells(mesh, parts, 0).unwrap();
    Arc::new(build_layout(mesh, &owner, layers).unwrap())
}

/// Standing wave `cos(sqrt(2) pi t) sin(pi x) sin(pi y)`.
pub fn standing_wave() -> ProblemData {
    ProblemData {
        u0: Some(Arc::new(|p: [f64; 2]| (PI * p[0]).sin() * (PI * p[1]).sin())),
        ..ProblemData::default()
    }
}

pub fn standing_wave_exact(p: [f64; 2], t: f64) -> f64 {
    (2f64.sqrt() * PI * t).cos() * (PI * p[0]).sin() * (PI * p[1]).sin()
}

/// Smooth data with every term switched on.
pub fn busy_data() -> ProblemData {
    ProblemData {
        u0: Some(Arc::new(|p: [f64; 2]| (PI * p[0]).sin() * (0.5 * PI * p[1]).cos() + 0.2 * p[0])),
        v0: Some(Arc::new(|p: [f64; 2]| p[0] * p[1] - 0.3)),
        source: Some(Arc::new(|p: [f64; 2], t: f64| p[0] * p[1] * (3.0 * t).cos())),
        dirichlet: Some(Arc::new(|p: [f64; 2], t: f64| (p[0] + 0.5 * p[1]) * (2.0 * t).sin() + 0.2 * p[0])),
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
