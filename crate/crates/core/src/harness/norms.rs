//! Error norms between solutions on the same mesh, on a uniformly refined
//! mesh, or against an analytic function.

use crate::dg::{BrokenSpace, QuadratureRule};
use crate::mesh::Point;
use crate::swip::{SwipError, SwipOperator};

/// `(|a - b|, |b|)` in `L2` for two vectors of the same space.
pub fn l2_distance(space: &BrokenSpace, a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = space.dofs_per_cell();
    let (mut err, mut norm) = (0.0, 0.0);
    for (d, (x, y)) in a.iter().zip(b).enumerate() {
        let m = space.mass_value(d / n);
        err += m * (x - y) * (x - y);
        norm += m * y * y;
    }
    (err.sqrt(), norm.sqrt())
}

/// `(|u_h - u|, |u|)` in `L2` for an analytic `u`, with a rule of degree
/// `2k + 4` on every cell.
pub fn l2_distance_exact(space: &BrokenSpace, coeffs: &[f64], u: &dyn Fn(Point) -> f64) -> (f64, f64) {
    let rule = QuadratureRule::triangle(2 * space.degree() + 4);
    let n = space.dofs_per_cell();
    let (mut err, mut norm) = (0.0, 0.0);
    for c in 0..space.mesh().n_cells() {
        let geo = space.geometry(c);
        let block = &coeffs[c * n..(c + 1) * n];
        for (xi, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.to_physical(*xi);
            let exact = u(x);
            let d = space.eval_block(c, block, x) - exact;
            err += w * geo.det.abs() * d * d;
            norm += w * geo.det.abs() * exact * exact;
        }
    }
    (err.sqrt(), norm.sqrt())
}

/// Parent of a cell of a mesh refined `levels` times.
pub fn ancestor(fine_cell: usize, levels: usize) -> usize {
    fine_cell >> (2 * levels)
}

/// `(|u_coarse - u_fine|, |u_fine|)` in `L2` where `fine` lives on the
/// coarse mesh refined `levels` times.
///
/// Both functions are polynomials on every fine cell, so the fine-cell rule
/// of degree `2 max(k_c, k_f)` integrates the difference exactly.
pub fn l2_distance_refined(
    coarse: &BrokenSpace,
    u_coarse: &[f64],
    fine: &BrokenSpace,
    u_fine: &[f64],
    levels: usize,
) -> (f64, f64) {
    let rule = QuadratureRule::triangle(2 * coarse.degree().max(fine.degree()));
    let (nc, nf) = (coarse.dofs_per_cell(), fine.dofs_per_cell());
    let (mut err, mut norm) = (0.0, 0.0);
    for f in 0..fine.mesh().n_cells() {
        let c = ancestor(f, levels);
        let geo = fine.geometry(f);
        let cb = &u_coarse[c * nc..(c + 1) * nc];
        let fb = &u_fine[f * nf..(f + 1) * nf];
        for (xi, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.to_physical(*xi);
            let r = fine.eval_block(f, fb, x);
            let d = coarse.eval_block(c, cb, x) - r;
            err += w * geo.det.abs() * d * d;
            norm += w * geo.det.abs() * r * r;
        }
    }
    (err.sqrt(), norm.sqrt())
}

/// `L2` projection onto the coarse space of a function given on the coarse
/// mesh refined `levels` times.
pub fn project_refined(coarse: &BrokenSpace, fine: &BrokenSpace, u_fine: &[f64], levels: usize) -> Vec<f64> {
    let rule = QuadratureRule::triangle(coarse.degree() + fine.degree());
    let (nc, nf) = (coarse.dofs_per_cell(), fine.dofs_per_cell());
    let mut out = vec![0.0; coarse.n_dofs()];
    let mut vals = vec![0.0; nc];
    let mut grads = vec![[0.0; 2]; nc];
    for f in 0..fine.mesh().n_cells() {
        let c = ancestor(f, levels);
        let geo = fine.geometry(f);
        let fb = &u_fine[f * nf..(f + 1) * nf];
        for (xi, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.to_physical(*xi);
            let r = fine.eval_block(f, fb, x) * w * geo.det.abs();
            coarse.basis_at(c, x, &mut vals, &mut grads);
            for (o, v) in out[c * nc..(c + 1) * nc].iter_mut().zip(&vals) {
                *o += r * v;
            }
        }
    }
    for (d, o) in out.iter_mut().enumerate() {
        *o /= coarse.mass_value(d / nc);
    }
    out
}

/// Combined `|.|_a x |.|_L2` distance of `(u, v)` to `(u_ref, v_ref)`,
/// relative to the reference: `sqrt(|e_u|_a^2 + |e_v|^2) / sqrt(|u_ref|_a^2 + |v_ref|^2)`.
/// Also returns the relative component errors.
pub fn combined_distance(
    op: &SwipOperator,
    u: &[f64],
    v: &[f64],
    u_ref: &[f64],
    v_ref: &[f64],
) -> Result<CombinedDistance, SwipError> {
    let eu: Vec<f64> = u.iter().zip(u_ref).map(|(a, b)| a - b).collect();
    let ev: Vec<f64> = v.iter().zip(v_ref).map(|(a, b)| a - b).collect();
    let m = op.mass();
    let l2 = |w: &[f64]| w.iter().zip(m).map(|(x, m)| m * x * x).sum::<f64>().sqrt();
    let (eu_a, ev_l2) = (op.a_norm(&eu)?, l2(&ev));
    let (u_a, v_l2) = (op.a_norm(u_ref)?, l2(v_ref));
    Ok(CombinedDistance {
        u_a: ratio(eu_a, u_a),
        v_l2: ratio(ev_l2, v_l2),
        combined: ratio(eu_a.hypot(ev_l2), u_a.hypot(v_l2)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedDistance {
    pub u_a: f64,
    pub v_l2: f64,
    pub combined: f64,
}

/// `err / norm`, or the absolute error when the reference vanishes.
pub fn ratio(err: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}
