use super::LinalgError;

/// Symmetric matrix in compressed sparse row form.
///
/// Both triangles are stored. Column indices are sorted within each row and
/// the pattern is structurally symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Wraps CSR arrays after checking shape, ordering and symmetry of the
    /// pattern and values.
    pub fn from_csr(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, LinalgError> {
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 || row_ptr[n] != col_idx.len() {
            return Err(LinalgError::InvalidPattern("row pointer array is inconsistent".into()));
        }
        if values.len() != col_idx.len() {
            return Err(LinalgError::InvalidPattern("value and index arrays differ in length".into()));
        }
        for i in 0..n {
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LinalgError::InvalidPattern(format!("row {i} is not strictly sorted")));
            }
            if cols.last().is_some_and(|&c| c >= n) {
                return Err(LinalgError::InvalidPattern(format!("row {i} has a column out of range")));
            }
        }
        let m = Self {
            n,
            row_ptr,
            col_idx,
            values,
        };
        for i in 0..n {
            for (j, v) in m.row(i) {
                if m.get(j, i) != Some(v) {
                    return Err(LinalgError::InvalidPattern(format!("entry ({i}, {j}) has no mirror")));
                }
            }
        }
        Ok(m)
    }

    /// Builds a matrix from upper-triangle entries `(i, j, v)` with `i <= j`;
    /// duplicates are summed in input order and the strict upper part is
    /// mirrored, so the result is symmetric bit for bit.
    pub fn from_upper_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i > j || j >= n {
                return Err(LinalgError::InvalidPattern(format!("entry ({i}, {j}) is not in the upper triangle")));
            }
            rows[i].push((j, v));
        }
        let mut upper: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for mut row in rows {
            // stable sort keeps the input order of duplicates
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            upper.push(merged);
        }
        let mut full: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in upper.iter().enumerate() {
            for &(j, v) in row {
                if j != i {
                    full[j].push((i, v));
                }
            }
        }
        for (i, row) in upper.into_iter().enumerate() {
            full[i].extend(row);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in full {
            for (j, v) in row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| self.values[r.start + k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).unwrap_or(0.0)).collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul(x))
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `alpha A + diag(d)`. The diagonal must be part of the pattern of
    /// every row with `d[i] != 0`; missing diagonals are inserted.
    pub fn scale_add_diag(&self, alpha: f64, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz() + self.n);
        let mut values = Vec::with_capacity(self.nnz() + self.n);
        row_ptr.push(0);
        for (i, &di) in d.iter().enumerate() {
            let mut placed = false;
            for (j, v) in self.row(i) {
                if !placed && j > i {
                    col_idx.push(i);
                    values.push(di);
                    placed = true;
                }
                if j == i {
                    col_idx.push(j);
                    values.push(di + alpha * v);
                    placed = true;
                } else {
                    col_idx.push(j);
                    values.push(alpha * v);
                }
            }
            if !placed {
                col_idx.push(i);
                values.push(di);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseSymMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseSymMatrix::from_upper_triplets(n, &t).unwrap()
    }

    #[test]
    fn triplets_are_mirrored() {
        let a = tridiag(4);
        assert_eq!(a.nnz(), 10);
        assert_eq!(a.get(1, 0), Some(-1.0));
        assert_eq!(a.get(0, 2), None);
        assert_eq!(a.mul(&[1.0, 1.0, 1.0, 1.0]), vec![1.0, 0.0, 0.0, 1.0]);
        assert!(SparseSymMatrix::from_upper_triplets(2, &[(1, 0, 1.0)]).is_err());
    }

    #[test]
    fn duplicates_sum() {
        let a = SparseSymMatrix::from_upper_triplets(2, &[(0, 1, 1.0), (0, 1, 2.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(a.get(1, 0), Some(3.0));
        assert_eq!(a.get(1, 1), None);
    }

    #[test]
    fn csr_validation() {
        let a = tridiag(3);
        let ok = SparseSymMatrix::from_csr(3, a.row_ptr().to_vec(), a.col_idx().to_vec(), a.values().to_vec());
        assert_eq!(ok.unwrap(), a);
        let mut v = a.values().to_vec();
        v[1] = -0.5;
        assert!(SparseSymMatrix::from_csr(3, a.row_ptr().to_vec(), a.col_idx().to_vec(), v).is_err());
        assert!(SparseSymMatrix::from_csr(3, vec![0, 1], vec![0], vec![1.0]).is_err());
    }

    #[test]
    fn scale_add_diag_inserts_missing_diagonal() {
        let a = SparseSymMatrix::from_upper_triplets(3, &[(0, 1, 1.0), (1, 1, 4.0)]).unwrap();
        let b = a.scale_add_diag(2.0, &[1.0, 1.0, 1.0]);
        assert_eq!(b.to_dense(), vec![vec![1.0, 2.0, 0.0], vec![2.0, 9.0, 0.0], vec![0.0, 0.0, 1.0]]);
        for i in 0..3 {
            let cols: Vec<usize> = b.row(i).map(|e| e.0).collect();
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn norms() {
        let a = tridiag(5);
        assert_eq!(a.norm_inf(), 4.0);
        assert_eq!(a.quadratic_form(&[1.0; 5]), 2.0);
        assert_eq!(a.diagonal(), vec![2.0; 5]);
    }
}
