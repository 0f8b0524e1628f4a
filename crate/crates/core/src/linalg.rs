//! Row-oriented matrix storage and the kernels a Kaczmarz step needs.
//!
//! A [`RowMatrix`] is either dense row-major or compressed sparse row. The
//! representation is picked from the density of the input (see
//! [`DENSE_THRESHOLD`]) and is invisible to callers. Sparse matrices also keep
//! a column-major copy of their entries so that `A * dx` for a sparse update
//! `dx` touches only the affected columns.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};

/// Inputs with at least this fraction of nonzeros are stored dense.
pub const DENSE_THRESHOLD: f64 = 0.25;

/// Largest `min(m, n)` for which [`RowMatrix::spectral_summary`] runs a full SVD.
pub const SVD_SIZE_LIMIT: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StorageKind {
    Dense,
    Sparse,
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(Vec<f64>),
    Sparse {
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
        // transposed copy for column access
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        col_values: Vec<f64>,
    },
}

/// Immutable `m x n` coefficient matrix with cached row norms.
#[derive(Clone, Debug)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    storage: Storage,
    row_norm_sq: Vec<f64>,
    fro_norm_sq: f64,
}

impl RowMatrix {
    /// Builds a dense matrix from row-major data.
    pub fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols)?;
        check_len("dense matrix data", rows * cols, data.len())?;
        Ok(Self::with_storage(rows, cols, Storage::Dense(data)))
    }

    /// Builds a dense matrix from a slice of equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(m * n);
        for row in rows {
            check_len("matrix row", n, row.as_ref().len())?;
            data.extend_from_slice(row.as_ref());
        }
        Self::from_dense(m, n, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_dense(n, n, data)
    }

    /// Builds a matrix from 0-based `(row, col, value)` triplets, summing
    /// duplicates. Storage is dense when the density reaches [`DENSE_THRESHOLD`].
    pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        check_shape(rows, cols)?;
        let merged = merge_triplets(rows, cols, entries)?;
        let density = merged.len() as f64 / (rows as f64 * cols as f64);
        let kind = if density >= DENSE_THRESHOLD {
            StorageKind::Dense
        } else {
            StorageKind::Sparse
        };
        Ok(Self::build_from_merged(rows, cols, merged, kind))
    }

    /// Like [`RowMatrix::from_triplets`] with an explicit storage choice.
    pub fn from_triplets_with(
        rows: usize,
        cols: usize,
        entries: &[(usize, usize, f64)],
        kind: StorageKind,
    ) -> Result<Self> {
        check_shape(rows, cols)?;
        let merged = merge_triplets(rows, cols, entries)?;
        Ok(Self::build_from_merged(rows, cols, merged, kind))
    }

    fn build_from_merged(rows: usize, cols: usize, merged: Vec<(usize, usize, f64)>, kind: StorageKind) -> Self {
        match kind {
            StorageKind::Dense => {
                let mut data = vec![0.0; rows * cols];
                for (i, j, v) in merged {
                    data[i * cols + j] = v;
                }
                Self::with_storage(rows, cols, Storage::Dense(data))
            }
            StorageKind::Sparse => {
                // merged is sorted by (row, col)
                let mut row_ptr = vec![0usize; rows + 1];
                let mut col_idx = Vec::with_capacity(merged.len());
                let mut values = Vec::with_capacity(merged.len());
                for &(i, j, v) in &merged {
                    row_ptr[i + 1] += 1;
                    col_idx.push(j);
                    values.push(v);
                }
                for i in 0..rows {
                    row_ptr[i + 1] += row_ptr[i];
                }

                let mut col_ptr = vec![0usize; cols + 1];
                for &(_, j, _) in &merged {
                    col_ptr[j + 1] += 1;
                }
                for j in 0..cols {
                    col_ptr[j + 1] += col_ptr[j];
                }
                let mut next = col_ptr.clone();
                let mut row_idx = vec![0usize; merged.len()];
                let mut col_values = vec![0.0; merged.len()];
                for &(i, j, v) in &merged {
                    let slot = next[j];
                    row_idx[slot] = i;
                    col_values[slot] = v;
                    next[j] += 1;
                }
                Self::with_storage(
                    rows,
                    cols,
                    Storage::Sparse {
                        row_ptr,
                        col_idx,
                        values,
                        col_ptr,
                        row_idx,
                        col_values,
                    },
                )
            }
        }
    }

    fn with_storage(rows: usize, cols: usize, storage: Storage) -> Self {
        let mut row_norm_sq = vec![0.0; rows];
        match &storage {
            Storage::Dense(data) => {
                for (i, row) in data.chunks_exact(cols).enumerate() {
                    row_norm_sq[i] = row.iter().map(|v| v * v).sum();
                }
            }
            Storage::Sparse { row_ptr, values, .. } => {
                for i in 0..rows {
                    row_norm_sq[i] = values[row_ptr[i]..row_ptr[i + 1]].iter().map(|v| v * v).sum();
                }
            }
        }
        let fro_norm_sq = row_norm_sq.iter().sum();
        RowMatrix {
            rows,
            cols,
            storage,
            row_norm_sq,
            fro_norm_sq,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn storage_kind(&self) -> StorageKind {
        match self.storage {
            Storage::Dense(_) => StorageKind::Dense,
            Storage::Sparse { .. } => StorageKind::Sparse,
        }
    }

    /// Number of structurally stored entries (explicit zeros excluded for dense).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(data) => data.iter().filter(|v| **v != 0.0).count(),
            Storage::Sparse { values, .. } => values.len(),
        }
    }

    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.rows as f64 * self.cols as f64)
    }

    /// `||a_i||_2^2`
    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_norm_sq[i]
    }

    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norm_sq
    }

    /// `||A||_F^2`
    pub fn fro_norm_sq(&self) -> f64 {
        self.fro_norm_sq
    }

    pub fn is_zero(&self) -> bool {
        self.fro_norm_sq == 0.0
    }

    /// `a_i^T x`
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        match &self.storage {
            Storage::Dense(data) => {
                let row = &data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            }
            Storage::Sparse {
                row_ptr,
                col_idx,
                values,
                ..
            } => {
                let span = row_ptr[i]..row_ptr[i + 1];
                col_idx[span.clone()]
                    .iter()
                    .zip(&values[span])
                    .map(|(&j, v)| v * x[j])
                    .sum()
            }
        }
    }

    /// `out += alpha * a_i`
    pub fn add_row_scaled(&self, i: usize, alpha: f64, out: &mut [f64]) {
        match &self.storage {
            Storage::Dense(data) => {
                let row = &data[i * self.cols..(i + 1) * self.cols];
                for (o, a) in out.iter_mut().zip(row) {
                    *o += alpha * a;
                }
            }
            Storage::Sparse {
                row_ptr,
                col_idx,
                values,
                ..
            } => {
                for k in row_ptr[i]..row_ptr[i + 1] {
                    out[col_idx[k]] += alpha * values[k];
                }
            }
        }
    }

    /// `out += alpha * A[:, j]`
    pub fn add_col_scaled(&self, j: usize, alpha: f64, out: &mut [f64]) {
        match &self.storage {
            Storage::Dense(data) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o += alpha * data[i * self.cols + j];
                }
            }
            Storage::Sparse {
                col_ptr,
                row_idx,
                col_values,
                ..
            } => {
                for k in col_ptr[j]..col_ptr[j + 1] {
                    out[row_idx[k]] += alpha * col_values[k];
                }
            }
        }
    }

    /// Calls `f(col, value)` for each stored entry of row `i`.
    #[inline]
    pub fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match &self.storage {
            Storage::Dense(data) => {
                for (j, &v) in data[i * self.cols..(i + 1) * self.cols].iter().enumerate() {
                    f(j, v);
                }
            }
            Storage::Sparse {
                row_ptr,
                col_idx,
                values,
                ..
            } => {
                for k in row_ptr[i]..row_ptr[i + 1] {
                    f(col_idx[k], values[k]);
                }
            }
        }
    }

    /// Entries of row `i` as `(col, value)` pairs.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Dense(data) => data[i * self.cols..(i + 1) * self.cols]
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v))
                .collect(),
            Storage::Sparse {
                row_ptr,
                col_idx,
                values,
                ..
            } => (row_ptr[i]..row_ptr[i + 1]).map(|k| (col_idx[k], values[k])).collect(),
        }
    }

    /// Nonzero entries as 0-based `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows)
            .flat_map(|i| self.row_entries(i).into_iter().map(move |(j, v)| (i, j, v)))
            .collect()
    }

    /// `A x`
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("apply: x", self.cols, x.len())?;
        check_len("apply: output", self.rows, out.len())?;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, x);
        }
        Ok(())
    }

    /// `A^T eta = sum_i eta_i a_i`
    pub fn transpose_apply(&self, eta: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cols];
        self.transpose_apply_into(eta, &mut out)?;
        Ok(out)
    }

    pub fn transpose_apply_into(&self, eta: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("transpose_apply: eta", self.rows, eta.len())?;
        check_len("transpose_apply: output", self.cols, out.len())?;
        out.fill(0.0);
        for (i, &w) in eta.iter().enumerate() {
            if w != 0.0 {
                self.add_row_scaled(i, w, out);
            }
        }
        Ok(())
    }

    /// `b - A x`
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        self.residual_into(x, b, &mut out)?;
        Ok(out)
    }

    pub fn residual_into(&self, x: &[f64], b: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("residual: b", self.rows, b.len())?;
        self.apply_into(x, out)?;
        for (o, bi) in out.iter_mut().zip(b) {
            *o = bi - *o;
        }
        Ok(())
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Dense copy of the rows listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows.len(), self.cols);
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.row_entries(i) {
                out[(r, j)] = v;
            }
        }
        out
    }

    /// Largest singular value of the row submatrix `A_rows`.
    pub fn row_block_sigma_max(&self, rows: &[usize]) -> f64 {
        match rows {
            [] => 0.0,
            [i] => self.row_norm_sq[*i].sqrt(),
            _ => {
                let block = self.select_rows(rows);
                singular_values(&block).first().copied().unwrap_or(0.0)
            }
        }
    }

    /// Full singular value summary of the matrix.
    pub fn spectral_summary(&self) -> Result<SpectralSummary> {
        let small = self.rows.min(self.cols);
        if small > SVD_SIZE_LIMIT {
            return Err(Error::TooLargeForSvd {
                limit: SVD_SIZE_LIMIT,
                actual: small,
            });
        }
        if self.is_zero() {
            return Err(Error::ZeroMatrix);
        }
        let sv = singular_values(&self.to_nalgebra());
        SpectralSummary::from_singular_values(&sv, self.rows, self.cols).ok_or(Error::ZeroMatrix)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralSummary {
    pub sigma_max: f64,
    /// Smallest of the `min(m, n)` singular values, possibly zero.
    pub sigma_min: f64,
    pub sigma_min_nonzero: f64,
    /// Numerical rank at tolerance `max(m, n) * sigma_max * eps`.
    pub rank: usize,
    pub min_dim: usize,
}

impl SpectralSummary {
    /// Builds a summary from singular values sorted in decreasing order.
    /// Returns `None` when no singular value clears the rank tolerance.
    pub fn from_singular_values(sv: &[f64], rows: usize, cols: usize) -> Option<Self> {
        let sigma_max = sv.first().copied().unwrap_or(0.0);
        let tol = rank_tolerance(rows, cols, sigma_max);
        let rank = sv.iter().filter(|&&s| s > tol).count();
        if rank == 0 {
            return None;
        }
        let min_dim = rows.min(cols);
        Some(SpectralSummary {
            sigma_max,
            sigma_min: if sv.len() == min_dim {
                sv[min_dim - 1]
            } else {
                0.0
            },
            sigma_min_nonzero: sv[rank - 1],
            rank,
            min_dim,
        })
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.min_dim
    }

    /// `sigma_max / sigma_min`, or `None` for rank-deficient matrices.
    pub fn condition_number(&self) -> Option<f64> {
        if self.is_full_rank() {
            Some(self.sigma_max / self.sigma_min)
        } else {
            None
        }
    }
}

pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * f64::EPSILON
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix must have at least one row and column, got {rows}x{cols}"
        )));
    }
    Ok(())
}

fn merge_triplets(rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<Vec<(usize, usize, f64)>> {
    let mut sorted = Vec::with_capacity(entries.len());
    for &(i, j, v) in entries {
        if i >= rows || j >= cols {
            return Err(Error::InvalidArgument(format!(
                "entry ({i}, {j}) outside a {rows}x{cols} matrix"
            )));
        }
        sorted.push((i, j, v));
    }
    sorted.sort_by_key(|&(i, j, _)| (i, j));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
    for (i, j, v) in sorted {
        match merged.last_mut() {
            Some(last) if last.0 == i && last.1 == j => last.2 += v,
            _ => merged.push((i, j, v)),
        }
    }
    merged.retain(|e| e.2 != 0.0);
    Ok(merged)
}
