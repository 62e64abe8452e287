use super::quadrature::QuadratureRule;

const CENTER: f64 = 1.0 / 3.0;
const SCALE: f64 = 1.5;

/// Orthonormal basis of `P_k` on the reference triangle, stored as
/// coefficients over the centred monomials `s^a t^b` with
/// `s = 1.5 (x - 1/3)`, `t = 1.5 (y - 1/3)` (ordered by total degree, then
/// by the power of `t`).
///
/// Built by Cholesky-based Gram-Schmidt against the monomial Gram matrix,
/// applied twice to remove the round-off of the first pass.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    degree: usize,
    powers: Vec<(usize, usize)>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coeffs: Vec<Vec<f64>>,
}

impl ReferenceBasis {
    pub fn new(degree: usize) -> Self {
        let powers: Vec<(usize, usize)> = (0..=degree)
            .flat_map(|d| (0..=d).map(move |b| (d - b, b)))
            .collect();
        let n = powers.len();
        let mut coeffs: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let rule = QuadratureRule::triangle(2 * degree);
        let mut monomial_gram = vec![vec![0.0; n]; n];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let m = centred_monomials(&powers, *p);
            for i in 0..n {
                for j in 0..n {
                    monomial_gram[i][j] += w * m[i] * m[j];
                }
            }
        }
        for _ in 0..2 {
            // G = C Gm C^T, then C <- L^{-1} C with G = L L^T
            let g = congruence(&coeffs, &monomial_gram);
            let l = cholesky(&g);
            coeffs = forward_substitute(&l, &coeffs);
        }
        Self {
            degree,
            powers,
            coeffs,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    /// Values of all basis functions at a reference point.
    pub fn eval(&self, p: [f64; 2], out: &mut [f64]) {
        let mono = self.monomials(p);
        for (o, row) in out.iter_mut().zip(&self.coeffs) {
            *o = dot(row, &mono);
        }
    }

    /// Reference gradients of all basis functions at a reference point.
    pub fn grad(&self, p: [f64; 2], out: &mut [[f64; 2]]) {
        let (dx, dy) = self.monomial_grads(p);
        for (o, row) in out.iter_mut().zip(&self.coeffs) {
            *o = [dot(row, &dx), dot(row, &dy)];
        }
    }

    fn monomials(&self, p: [f64; 2]) -> Vec<f64> {
        centred_monomials(&self.powers, p)
    }

    fn monomial_grads(&self, [x, y]: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
        let (s, t) = (SCALE * (x - CENTER), SCALE * (y - CENTER));
        let dx = self
            .powers
            .iter()
            .map(|&(a, b)| {
                if a == 0 {
                    0.0
                } else {
                    SCALE * a as f64 * s.powi(a as i32 - 1) * t.powi(b as i32)
                }
            })
            .collect();
        let dy = self
            .powers
            .iter()
            .map(|&(a, b)| {
                if b == 0 {
                    0.0
                } else {
                    SCALE * b as f64 * s.powi(a as i32) * t.powi(b as i32 - 1)
                }
            })
            .collect();
        (dx, dy)
    }
}

fn centred_monomials(powers: &[(usize, usize)], [x, y]: [f64; 2]) -> Vec<f64> {
    let (s, t) = (SCALE * (x - CENTER), SCALE * (y - CENTER));
    powers.iter().map(|&(a, b)| s.powi(a as i32) * t.powi(b as i32)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn congruence(c: &[Vec<f64>], g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = c.len();
    let cg: Vec<Vec<f64>> = c
        .iter()
        .map(|row| (0..n).map(|j| (0..n).map(|k| row[k] * g[k][j]).sum()).collect())
        .collect();
    (0..n)
        .map(|i| (0..n).map(|j| dot(&cg[i], &c[j])).collect())
        .collect()
}

fn cholesky(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Solves `L X = B` for lower-triangular `L`.
fn forward_substitute(l: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = l.len();
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = b[i].clone();
        for k in 0..i {
            let f = l[i][k];
            for (r, xk) in row.iter_mut().zip(&x[k]) {
                *r -= f * xk;
            }
        }
        for r in &mut row {
            *r /= l[i][i];
        }
        x.push(row);
    }
    x
}
