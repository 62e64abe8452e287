use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{LinalgError, SparseSymMatrix};

/// Symmetric positive definite approximation `P ~ A^{-1}`.
pub trait Preconditioner: Send + Sync {
    /// `z = P r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    None,
    #[default]
    Ic0,
    BlockJacobi,
}

impl std::str::FromStr for PreconditionerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "ic0" => Ok(Self::Ic0),
            "block-jacobi" => Ok(Self::BlockJacobi),
            _ => Err(format!("unknown preconditioner `{s}` (none, ic0, block-jacobi)")),
        }
    }
}

/// Builds a preconditioner of the given kind; `block_size` is used by the
/// block Jacobi variant.
pub fn build_preconditioner(
    kind: PreconditionerKind,
    a: &SparseSymMatrix,
    block_size: usize,
) -> Result<Box<dyn Preconditioner>, LinalgError> {
    Ok(match kind {
        PreconditionerKind::None => Box::new(Identity),
        PreconditionerKind::Ic0 => Box::new(Ic0::new(a)?),
        PreconditionerKind::BlockJacobi => {
            let n = a.n();
            let blocks: Vec<Range<usize>> = (0..n.div_ceil(block_size.max(1)))
                .map(|b| b * block_size..((b + 1) * block_size).min(n))
                .collect();
            Box::new(BlockJacobi::new(a, &blocks)?)
        }
    })
}

/// Zero-fill incomplete Cholesky factor `L` on the lower pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ic0 {
    row_ptr: Vec<usize>,
    /// Lower-triangle columns per row, diagonal last.
    col_idx: Vec<usize>,
    values: Vec<f64>,
    shift: f64,
}

const MAX_SHIFT_RETRIES: usize = 8;

impl Ic0 {
    pub fn new(a: &SparseSymMatrix) -> Result<Self, LinalgError> {
        let diag = a.diagonal();
        let mean = diag.iter().sum::<f64>() / diag.len().max(1) as f64;
        let mut shift = 0.0;
        for attempt in 0..=MAX_SHIFT_RETRIES {
            if let Some(f) = Self::factor(a, shift) {
                if attempt > 0 {
                    log::warn!("incomplete Cholesky needed a diagonal shift of {shift:e}");
                }
                return Ok(f);
            }
            shift = if attempt == 0 { 1e-3 * mean } else { 2.0 * shift };
        }
        Err(LinalgError::FactorizationFailed {
            retries: MAX_SHIFT_RETRIES,
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    fn factor(a: &SparseSymMatrix, shift: f64) -> Option<Self> {
        let n = a.n();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for i in 0..n {
            let start = col_idx.len();
            for (j, v) in a.row(i).take_while(|&(j, _)| j <= i) {
                col_idx.push(j);
                values.push(if j == i { v + shift } else { v });
            }
            if col_idx.last() != Some(&i) {
                return None;
            }
            let end = col_idx.len();
            for p in start..end {
                let k = col_idx[p];
                // s = sum_{j < k} L[i][j] L[k][j] over the shared pattern
                if k == i {
                    let pivot = values[p] - values[start..p].iter().map(|x| x * x).sum::<f64>();
                    if !(pivot > 0.0) || !pivot.is_finite() {
                        return None;
                    }
                    values[p] = pivot.sqrt();
                    continue;
                }
                let (ks, ke) = (row_ptr[k], row_ptr[k + 1]);
                let mut s = 0.0;
                let (mut x, mut y) = (start, ks);
                while x < p && y < ke - 1 {
                    match col_idx[x].cmp(&col_idx[y]) {
                        std::cmp::Ordering::Less => x += 1,
                        std::cmp::Ordering::Greater => y += 1,
                        std::cmp::Ordering::Equal => {
                            s += values[x] * values[y];
                            x += 1;
                            y += 1;
                        }
                    }
                }
                values[p] = (values[p] - s) / values[ke - 1];
            }
            row_ptr.push(end);
        }
        Some(Self {
            row_ptr,
            col_idx,
            values,
            shift,
        })
    }
}

impl Preconditioner for Ic0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        // L y = r
        for i in 0..n {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = r[i];
            for p in s..e - 1 {
                acc -= self.values[p] * z[self.col_idx[p]];
            }
            z[i] = acc / self.values[e - 1];
        }
        // L^T z = y
        for i in (0..n).rev() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            z[i] /= self.values[e - 1];
            let zi = z[i];
            for p in s..e - 1 {
                z[self.col_idx[p]] -= self.values[p] * zi;
            }
        }
    }
}

/// Block diagonal preconditioner with dense Cholesky factors.
#[derive(Debug, Clone)]
pub struct BlockJacobi {
    blocks: Vec<Range<usize>>,
    factors: Vec<Vec<f64>>,
}

impl BlockJacobi {
    pub fn new(a: &SparseSymMatrix, blocks: &[Range<usize>]) -> Result<Self, LinalgError> {
        let mut covered = 0;
        for b in blocks {
            if b.start != covered || b.end < b.start {
                return Err(LinalgError::InvalidPattern("blocks must partition the index range".into()));
            }
            covered = b.end;
        }
        if covered != a.n() {
            return Err(LinalgError::InvalidPattern("blocks must partition the index range".into()));
        }
        let mut factors = Vec::with_capacity(blocks.len());
        for (bi, b) in blocks.iter().enumerate() {
            let m = b.len();
            let mut l = vec![0.0; m * m];
            for i in 0..m {
                for (j, v) in a.row(b.start + i) {
                    if b.contains(&j) && j <= b.start + i {
                        l[i * m + (j - b.start)] = v;
                    }
                }
            }
            for i in 0..m {
                for j in 0..=i {
                    let s: f64 = (0..j).map(|k| l[i * m + k] * l[j * m + k]).sum();
                    if i == j {
                        let d = l[i * m + i] - s;
                        if !(d > 0.0) {
                            return Err(LinalgError::SingularBlock { block: bi });
                        }
                        l[i * m + i] = d.sqrt();
                    } else {
                        l[i * m + j] = (l[i * m + j] - s) / l[j * m + j];
                    }
                }
            }
            factors.push(l);
        }
        Ok(Self {
            blocks: blocks.to_vec(),
            factors,
        })
    }
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (b, l) in self.blocks.iter().zip(&self.factors) {
            let m = b.len();
            let z = &mut z[b.clone()];
            let r = &r[b.clone()];
            for i in 0..m {
                let s: f64 = (0..i).map(|k| l[i * m + k] * z[k]).sum();
                z[i] = (r[i] - s) / l[i * m + i];
            }
            for i in (0..m).rev() {
                let s: f64 = (i + 1..m).map(|k| l[k * m + i] * z[k]).sum();
                z[i] = (z[i] - s) / l[i * m + i];
            }
        }
    }
}
