use std::f64::consts::PI;

/// Gauss-Legendre rule on `[0, 1]` with `n` points (exact to degree
/// `2n - 1`).
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            // map [-1, 1] -> [0, 1]
            points[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        Self { points, weights }
    }

    /// Smallest rule exact for polynomials of the given degree.
    pub fn with_exactness(degree: usize) -> Self {
        Self::new(degree / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on the reference triangle `(0,0), (1,0), (0,1)`.
///
/// Built as a collapsed (Duffy) product of Gauss-Legendre rules, so it is
/// exact for all polynomials of total degree up to `exactness`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Reference coordinates `(xi, eta)`.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn triangle(exactness: usize) -> Self {
        // xi = s (1 - t), eta = t, Jacobian (1 - t): degree exactness in s,
        // exactness + 1 in t
        let rs = GaussRule::with_exactness(exactness);
        let rt = GaussRule::with_exactness(exactness + 1);
        let mut points = Vec::with_capacity(rs.len() * rt.len());
        let mut weights = Vec::with_capacity(rs.len() * rt.len());
        for (t, wt) in rt.points.iter().zip(&rt.weights) {
            for (s, ws) in rs.points.iter().zip(&rs.weights) {
                points.push([s * (1.0 - t), *t]);
                weights.push(ws * wt * (1.0 - t));
            }
        }
        Self {
            points,
            weights,
            exactness,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates of the points.
    pub fn barycentric(&self) -> Vec<[f64; 3]> {
        self.points
            .iter()
            .map(|&[x, y]| [1.0 - x - y, x, y])
            .collect()
    }
}

/// `int_T x^a y^b` over the reference triangle, `a! b! / (a + b + 2)!`.
pub fn monomial_integral(a: usize, b: usize) -> f64 {
    let mut num = 1.0;
    // a! b! / (a+b+2)! = 1 / ((a+b+2)! / (a! b!))
    for k in 1..=b {
        num *= k as f64 / (a + k) as f64;
    }
    num / ((a + b + 1) as f64 * (a + b + 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_exactness() {
        for n in 1..8 {
            let r = GaussRule::new(n);
            for d in 0..2 * n {
                let q: f64 = r.points.iter().zip(&r.weights).map(|(x, w)| w * x.powi(d as i32)).sum();
                assert!((q - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn monomial_integrals() {
        assert!((monomial_integral(0, 0) - 0.5).abs() < 1e-16);
        assert!((monomial_integral(1, 0) - 1.0 / 6.0).abs() < 1e-16);
        assert!((monomial_integral(1, 1) - 1.0 / 24.0).abs() < 1e-16);
        assert!((monomial_integral(2, 0) - 1.0 / 12.0).abs() < 1e-16);
        assert!((monomial_integral(0, 3) - 1.0 / 20.0).abs() < 1e-16);
    }

    #[test]
    fn triangle_rule_exactness() {
        for exact in 0..=12 {
            let rule = QuadratureRule::triangle(exact);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 0.5).abs() < 1e-15);
            for d in 0..=exact {
                for b in 0..=d {
                    let a = d - b;
                    let q: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!((q - monomial_integral(a, b)).abs() < 1e-13, "deg {exact}: x^{a} y^{b}");
                }
            }
        }
    }
}
