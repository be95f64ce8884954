//! Compressed sparse row storage and the kernels built on it.

use std::io::Write;

use crate::dense::DenseMatrix;
use crate::error::{check_len, Error, Result};

/// A real matrix in canonical CSR form: column indices strictly increasing
/// within each row and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Which triangle (diagonal included) a sweep uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriangularPart {
    Lower,
    Upper,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, checking the canonical-form invariants.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 || *row_offsets.last().unwrap() != values.len() {
            return Err(Error::InvalidMatrix("row_offsets must span the value array".into()));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidMatrix("col_indices and values differ in length".into()));
        }
        for i in 0..n_rows {
            let (a, b) = (row_offsets[i], row_offsets[i + 1]);
            if a > b {
                return Err(Error::InvalidMatrix(format!("row_offsets decrease at row {i}")));
            }
            for k in a..b {
                if col_indices[k] >= n_cols {
                    return Err(Error::InvalidMatrix(format!("column out of range in row {i}")));
                }
                if k > a && col_indices[k] <= col_indices[k - 1] {
                    return Err(Error::InvalidMatrix(format!("columns not increasing in row {i}")));
                }
                if values[k] == 0.0 {
                    return Err(Error::InvalidMatrix(format!("explicit zero in row {i}")));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Sums duplicates and drops entries that end up exactly zero.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(i, j, _) in triplets {
            assert!(i < n_rows && j < n_cols, "triplet ({i},{j}) out of range");
            counts[i + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }

        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n_rows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut s = 0.0;
                while k < row.len() && row[k].0 == j {
                    s += row[k].1;
                    k += 1;
                }
                if s != 0.0 {
                    col_indices.push(j);
                    values.push(s);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t)
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut t = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), &t)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for k in self.row_range(i) {
                d[(i, self.col_indices[k])] = self.values[k];
            }
        }
        d
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_range(i);
        (&self.col_indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// Row sums, i.e. the lumped version of a mass matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for k in self.row_range(i) {
                let j = self.col_indices[k];
                col_indices[next[j]] = i;
                values[next[j]] = self.values[k];
                next[j] += 1;
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Drops entries with |value| ≤ rel_tol · (largest |value| of the row).
    /// Used to clear floating-point cancellation residue after assembly.
    pub fn prune(&mut self, rel_tol: f64) {
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut w = 0;
        for i in 0..self.n_rows {
            let r = self.row_range(i);
            let scale = self.values[r.clone()].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for k in r {
                if self.values[k].abs() > rel_tol * scale {
                    self.col_indices[w] = self.col_indices[k];
                    self.values[w] = self.values[k];
                    w += 1;
                }
            }
            row_offsets.push(w);
        }
        self.col_indices.truncate(w);
        self.values.truncate(w);
        self.row_offsets = row_offsets;
    }

    pub fn scaled(&self, a: f64) -> Self {
        if a == 0.0 {
            return Self::zeros(self.n_rows, self.n_cols);
        }
        let mut m = self.clone();
        for v in &mut m.values {
            *v *= a;
        }
        m
    }

    /// Checked product M x.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("spmv input", self.n_cols, x.len())?;
        let mut y = vec![0.0; self.n_rows];
        self.mul_into(x, &mut y);
        Ok(y)
    }

    /// y = M x (unchecked except in debug builds).
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_range(i) {
                s += self.values[k] * x[self.col_indices[k]];
            }
            *yi = s;
        }
    }

    /// y += a · M x
    pub fn mul_add(&self, a: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_range(i) {
                s += self.values[k] * x[self.col_indices[k]];
            }
            *yi += a * s;
        }
    }

    /// y = Mᵀ x by scattering; used for restriction so the transpose never
    /// has to be stored.
    pub fn mul_transpose_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        y.fill(0.0);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_range(i) {
                y[self.col_indices[k]] += self.values[k] * xi;
            }
        }
    }

    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("spmv_transpose input", self.n_rows, x.len())?;
        let mut y = vec![0.0; self.n_cols];
        self.mul_transpose_into(x, &mut y);
        Ok(y)
    }

    /// Solves T x = b with T the chosen triangle of M, using `diag` in place
    /// of the stored diagonal. Off-diagonal entries come from M.
    pub fn triangular_solve_with_diag(&self, b: &[f64], x: &mut [f64], part: TriangularPart, diag: &[f64]) {
        x.copy_from_slice(b);
        self.triangular_solve_in_place(x, part, diag);
    }

    /// As `triangular_solve_with_diag`, with the right-hand side passed in
    /// `x` and overwritten by the solution.
    pub fn triangular_solve_in_place(&self, x: &mut [f64], part: TriangularPart, diag: &[f64]) {
        debug_assert_eq!(self.n_rows, self.n_cols);
        let n = self.n_rows;
        match part {
            TriangularPart::Lower => {
                for i in 0..n {
                    let mut s = x[i];
                    for k in self.row_range(i) {
                        let j = self.col_indices[k];
                        if j >= i {
                            break;
                        }
                        s -= self.values[k] * x[j];
                    }
                    x[i] = s / diag[i];
                }
            }
            TriangularPart::Upper => {
                for i in (0..n).rev() {
                    let mut s = x[i];
                    for k in self.row_range(i).rev() {
                        let j = self.col_indices[k];
                        if j <= i {
                            break;
                        }
                        s -= self.values[k] * x[j];
                    }
                    x[i] = s / diag[i];
                }
            }
        }
    }

    /// Writes the matrix in MatrixMarket coordinate format (1-based).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for i in 0..self.n_rows {
            for k in self.row_range(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, self.col_indices[k] + 1, self.values[k])?;
            }
        }
        Ok(())
    }
}

/// Checked sparse matrix-vector product.
pub fn spmv(m: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    m.spmv(x)
}

/// One Gauss–Seidel half-sweep with zero initial guess: solves T x = b where
/// T is the lower (forward) or upper (backward) triangle of M including the
/// diagonal.
pub fn triangular_sweep(m: &SparseMatrix, b: &[f64], part: TriangularPart) -> Result<Vec<f64>> {
    if m.n_rows() != m.n_cols() {
        return Err(Error::InvalidMatrix("triangular sweep needs a square matrix".into()));
    }
    check_len("triangular_sweep rhs", m.n_rows(), b.len())?;
    let diag = m.diagonal();
    if let Some(row) = diag.iter().position(|&d| d == 0.0) {
        return Err(Error::ZeroDiagonal { row });
    }
    let mut x = vec![0.0; b.len()];
    m.triangular_solve_with_diag(b, &mut x, part, &diag);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_zero_products() {
        let i3 = SparseMatrix::identity(3);
        assert_eq!(spmv(&i3, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let z = SparseMatrix::zeros(2, 2);
        assert_eq!(spmv(&z, &[5.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let i3 = SparseMatrix::identity(3);
        assert!(matches!(spmv(&i3, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, -1.0), (1, 0, 2.0), (1, 0, 0.5)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), 2.5);
    }

    #[test]
    fn new_rejects_unsorted_columns() {
        let r = SparseMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn hand_lower_sweep() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let x = triangular_sweep(&m, &[2.0, 3.0], TriangularPart::Lower).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn diagonal_sweep_divides() {
        let m = SparseMatrix::from_diagonal(&[2.0, 4.0, 8.0]);
        for part in [TriangularPart::Lower, TriangularPart::Upper] {
            let x = triangular_sweep(&m, &[2.0, 2.0, 2.0], part).unwrap();
            assert_eq!(x, vec![1.0, 0.5, 0.25]);
        }
    }

    #[test]
    fn zero_diagonal_names_row() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]);
        assert_eq!(
            triangular_sweep(&m, &[1.0, 1.0], TriangularPart::Lower),
            Err(Error::ZeroDiagonal { row: 1 })
        );
    }

    #[test]
    fn transpose_round_trip() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 3.0), (1, 2, -2.0)]);
        let t = m.transpose();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.get(2, 1), -2.0);
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn prune_clears_cancellation_residue() {
        let mut m = SparseMatrix::from_triplets(1, 3, &[(0, 0, 1.0), (0, 1, 1e-18), (0, 2, -0.5)]);
        m.prune(1e-12);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 2), -0.5);
    }

    #[test]
    fn matrix_market_header() {
        let mut buf = Vec::new();
        SparseMatrix::identity(2).write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket"));
        assert_eq!(s.lines().count(), 4);
    }
}
