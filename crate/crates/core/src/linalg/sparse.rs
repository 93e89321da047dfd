use nalgebra::DMatrix;

use super::Scalar;
use crate::error::{Error, Result};

/// Compressed-column sparse matrix.
///
/// Row indices are strictly increasing inside every column and the column
/// offsets have length `ncols + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMat<T = f64> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMat<T> {
    /// Builds from raw CSC arrays, validating every structural invariant.
    pub fn try_new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 {
            return Err(Error::dims(format!(
                "column offsets have length {}, expected {}",
                col_ptr.len(),
                ncols + 1
            )));
        }
        if col_ptr[0] != 0 || col_ptr[ncols] != row_idx.len() || row_idx.len() != values.len() {
            return Err(Error::dims("inconsistent CSC array lengths"));
        }
        for j in 0..ncols {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(Error::dims(format!("column offsets decrease at column {j}")));
            }
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::dims(format!(
                    "row indices not strictly increasing in column {j}"
                )));
            }
            if rows.last().is_some_and(|&r| r >= nrows) {
                return Err(Error::dims(format!("row index out of range in column {j}")));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut counts = vec![0usize; ncols + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::dims(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(i, j, v) in triplets {
            let p = next[j];
            rows[p] = i;
            vals[p] = v;
            next[j] += 1;
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for j in 0..ncols {
            scratch.clear();
            scratch.extend((counts[j]..counts[j + 1]).map(|p| (rows[p], vals[p])));
            scratch.sort_by_key(|&(i, _)| i);
            for &(i, v) in &scratch {
                if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == i {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Keeps every entry whose modulus exceeds `drop_tol`.
    pub fn from_dense(m: &DMatrix<T>, drop_tol: f64) -> Self {
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v.modulus() > drop_tol {
                    row_idx.push(i);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self {
            nrows: m.nrows(),
            ncols: m.ncols(),
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Entries of column `j` as `(row, value)` pairs.
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// All stored entries as `(row, col, value)`, column by column.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols).flat_map(move |j| self.col(j).map(move |(i, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let rows = &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]];
        match rows.binary_search(&i) {
            Ok(p) => self.values[self.col_ptr[j] + p],
            Err(_) => T::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.modulus()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.modulus_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn transpose(&self) -> Self {
        let trips: Vec<_> = self.triplets().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &trips).expect("transpose keeps indices in range")
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> SparseMat<U> {
        SparseMat {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// `self * x` for a vector over any scalar the entries convert into.
    pub fn mul_vec<U>(&self, x: &[U]) -> Vec<U>
    where
        U: Scalar,
        T: Into<U>,
    {
        assert_eq!(x.len(), self.ncols, "sparse matvec length mismatch");
        let mut y = vec![U::zero(); self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            if xj.is_zero() {
                continue;
            }
            for (i, v) in self.col(j) {
                y[i] += v.into() * xj;
            }
        }
        y
    }

    /// `selfᵀ * x`.
    pub fn tr_mul_vec<U>(&self, x: &[U]) -> Vec<U>
    where
        U: Scalar,
        T: Into<U>,
    {
        assert_eq!(x.len(), self.nrows, "sparse transposed matvec length mismatch");
        (0..self.ncols)
            .map(|j| self.col(j).fold(U::zero(), |acc, (i, v)| acc + v.into() * x[i]))
            .collect()
    }

    /// `self * X` for a dense right factor.
    pub fn mul_dense<U>(&self, x: &DMatrix<U>) -> DMatrix<U>
    where
        U: Scalar,
        T: Into<U>,
    {
        assert_eq!(x.nrows(), self.ncols, "sparse-dense product shape mismatch");
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.ncols {
                let xj = x[(j, c)];
                if xj.is_zero() {
                    continue;
                }
                for (i, v) in self.col(j) {
                    y[(i, c)] += v.into() * xj;
                }
            }
        }
        y
    }

    /// `selfᵀ * X` for a dense right factor.
    pub fn tr_mul_dense<U>(&self, x: &DMatrix<U>) -> DMatrix<U>
    where
        U: Scalar,
        T: Into<U>,
    {
        assert_eq!(x.nrows(), self.nrows, "sparse-transpose product shape mismatch");
        let mut y = DMatrix::zeros(self.ncols, x.ncols());
        for c in 0..x.ncols() {
            for j in 0..self.ncols {
                y[(j, c)] = self
                    .col(j)
                    .fold(U::zero(), |acc, (i, v)| acc + v.into() * x[(i, c)]);
            }
        }
        y
    }

    /// Sparse product `self * rhs` (Gustavson, column by column).
    pub fn mul_sparse(&self, rhs: &SparseMat<T>) -> Result<SparseMat<T>> {
        if self.ncols != rhs.nrows {
            return Err(Error::dims(format!(
                "cannot multiply {}x{} by {}x{}",
                self.nrows, self.ncols, rhs.nrows, rhs.ncols
            )));
        }
        let mut acc = vec![T::zero(); self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut col_ptr = vec![0];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        let mut pattern = Vec::new();
        for j in 0..rhs.ncols {
            pattern.clear();
            for (k, b) in rhs.col(j) {
                for (i, a) in self.col(k) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = T::zero();
                        pattern.push(i);
                    }
                    acc[i] += a * b;
                }
            }
            pattern.sort_unstable();
            for &i in &pattern {
                row_idx.push(i);
                values.push(acc[i]);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(SparseMat {
            nrows: self.nrows,
            ncols: rhs.ncols,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// `alpha * self + beta * other`.
    pub fn add_scaled(&self, alpha: T, other: &SparseMat<T>, beta: T) -> Result<SparseMat<T>> {
        if self.shape() != other.shape() {
            return Err(Error::dims(format!(
                "cannot add {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let trips: Vec<_> = self
            .triplets()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, &trips)
    }

    /// Assembles a block matrix. `blocks[bi][bj]` is `None` for a zero block;
    /// row heights and column widths are taken from the given sizes.
    pub fn from_blocks(
        row_sizes: &[usize],
        col_sizes: &[usize],
        blocks: &[Vec<Option<&SparseMat<T>>>],
    ) -> Result<SparseMat<T>> {
        let nrows = row_sizes.iter().sum();
        let ncols = col_sizes.iter().sum();
        let mut trips = Vec::new();
        let mut r0 = 0;
        for (bi, row) in blocks.iter().enumerate() {
            let mut c0 = 0;
            for (bj, blk) in row.iter().enumerate() {
                if let Some(b) = blk {
                    if b.shape() != (row_sizes[bi], col_sizes[bj]) {
                        return Err(Error::dims(format!(
                            "block ({bi}, {bj}) is {:?}, expected {:?}",
                            b.shape(),
                            (row_sizes[bi], col_sizes[bj])
                        )));
                    }
                    trips.extend(b.triplets().map(|(i, j, v)| (r0 + i, c0 + j, v)));
                }
                c0 += col_sizes[bj];
            }
            r0 += row_sizes[bi];
        }
        Self::from_triplets(nrows, ncols, &trips)
    }
}
