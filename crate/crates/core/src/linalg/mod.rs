//! Sparse symmetric matrices and preconditioned conjugate gradients.
//!
//! All reductions run sequentially in index order, so results are bitwise
//! reproducible for identical inputs.

mod precond;
mod sparse;

pub use precond::{build_preconditioner, BlockJacobi, Ic0, Identity, Preconditioner, PreconditionerKind};
pub use sparse::{dot, norm2, SparseSymMatrix};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite: p^T A p = {curvature:e} at iteration {iteration}")]
    Indefinite { iteration: usize, curvature: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("incomplete Cholesky failed after {retries} diagonal shifts")]
    FactorizationFailed { retries: usize },
    #[error("block {block} of the block Jacobi preconditioner is singular")]
    SingularBlock { block: usize },
    #[error("invalid sparsity pattern: {0}")]
    InvalidPattern(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    /// Final residual norm `|b - A x|`.
    pub residual: f64,
    pub converged: bool,
    /// Preconditioned residual norm `sqrt(r^T P r)` after each iteration,
    /// starting with the initial residual.
    pub history: Vec<f64>,
}

/// Solves `A x = b` by preconditioned CG, starting from the contents of `x`.
///
/// Stops when `|b - A x| <= tol |b|`; hitting `maxit` returns a report with
/// `converged == false` rather than an error.
pub fn cg_solve(
    a: &SparseSymMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    maxit: usize,
    precond: &dyn Preconditioner,
) -> Result<SolverReport, LinalgError> {
    let n = a.n();
    for len in [b.len(), x.len()] {
        if len != n {
            return Err(LinalgError::DimensionMismatch { expected: n, got: len });
        }
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolverReport {
            iterations: 0,
            residual: 0.0,
            converged: true,
            history: vec![0.0],
        });
    }
    let target = tol * bnorm;
    let mut r = a.mul(x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = vec![rz.max(0.0).sqrt()];
    let mut rnorm = norm2(&r);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    while rnorm > target && iterations < maxit {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LinalgError::Indefinite {
                iteration: iterations,
                curvature: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        iterations += 1;
        rnorm = norm2(&r);
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        history.push(rz_new.max(0.0).sqrt());
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(SolverReport {
        iterations,
        residual: rnorm,
        converged: rnorm <= target,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_one_iteration() {
        let a = SparseSymMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 0.0];
        let mut x = vec![0.0; 5];
        let rep = cg_solve(&a, &b, &mut x, 1e-12, 10, &Identity).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b);
    }

    #[test]
    fn two_by_two_hand_solution() {
        let a = SparseSymMatrix::from_upper_triplets(2, &[(0, 0, 4.0), (0, 1, 1.0), (1, 1, 3.0)]).unwrap();
        let mut x = vec![0.0; 2];
        let rep = cg_solve(&a, &[1.0, 2.0], &mut x, 1e-14, 10, &Identity).unwrap();
        assert!(rep.converged && rep.iterations <= 2);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs() {
        let a = SparseSymMatrix::identity(3);
        let mut x = vec![1.0; 3];
        let rep = cg_solve(&a, &[0.0; 3], &mut x, 1e-10, 10, &Identity).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(x, vec![0.0; 3]);
    }

    #[test]
    fn indefinite_breakdown() {
        let a = SparseSymMatrix::from_upper_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        let mut x = vec![0.0; 2];
        assert!(matches!(
            cg_solve(&a, &[0.0, 1.0], &mut x, 1e-10, 10, &Identity),
            Err(LinalgError::Indefinite { iteration: 0, .. })
        ));
    }

    #[test]
    fn dimension_check() {
        let a = SparseSymMatrix::identity(3);
        let mut x = vec![0.0; 2];
        assert!(cg_solve(&a, &[1.0; 3], &mut x, 1e-10, 10, &Identity).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        let a = SparseSymMatrix::from_upper_triplets(n, &t).unwrap();
        let mut x = vec![0.0; n];
        let rep = cg_solve(&a, &vec![1.0; n], &mut x, 1e-12, 3, &Identity).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert_eq!(rep.history.len(), 4);
    }
}
