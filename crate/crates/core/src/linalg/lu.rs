//! Left-looking sparse LU (Gilbert-Peierls) with threshold partial pivoting.
//!
//! The factorization computes `P A Q = L U` where `Q` comes from a fill-reducing
//! column ordering and `P` from the pivot choices made column by column. `L`
//! is unit lower triangular with the diagonal stored first in every column;
//! `U` stores its diagonal last.

use super::ordering::minimum_degree;
use super::{Scalar, SparseMat};
use crate::error::{Error, Result};

/// Column preordering applied before numeric factorization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnOrdering {
    Natural,
    /// Minimum degree on the pattern of `A + Aᵀ`.
    MinimumDegree,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LuOptions {
    pub ordering: ColumnOrdering,
    /// The diagonal candidate is kept when its modulus is at least this
    /// fraction of the largest candidate in the column; `1.0` is plain
    /// partial pivoting.
    pub pivot_threshold: f64,
}

impl Default for LuOptions {
    fn default() -> Self {
        Self {
            ordering: ColumnOrdering::MinimumDegree,
            pivot_threshold: 0.1,
        }
    }
}

/// Immutable LU factors of a square sparse matrix.
#[derive(Clone, Debug)]
pub struct LuFactor<T> {
    n: usize,
    l: SparseMat<T>,
    u: SparseMat<T>,
    /// `pinv[i]` is the pivot step at which original row `i` was chosen.
    pinv: Vec<usize>,
    /// `q[k]` is the original column factored at step `k`.
    q: Vec<usize>,
    options: LuOptions,
    /// Pivots that were not the diagonal entry of the ordered matrix.
    off_diagonal_pivots: usize,
}

pub fn sparse_lu<T: Scalar>(a: &SparseMat<T>) -> Result<LuFactor<T>> {
    sparse_lu_with(a, LuOptions::default())
}

pub fn sparse_lu_with<T: Scalar>(a: &SparseMat<T>, options: LuOptions) -> Result<LuFactor<T>> {
    let (nr, n) = a.shape();
    if nr != n {
        return Err(Error::dims(format!("LU needs a square matrix, got {nr}x{n}")));
    }
    let q = match options.ordering {
        ColumnOrdering::Natural => (0..n).collect(),
        ColumnOrdering::MinimumDegree => minimum_degree(n, a.col_ptr(), a.row_idx()),
    };
    let anorm = a.max_abs();
    let tiny = f64::EPSILON * anorm;

    const UNSET: usize = usize::MAX;
    let mut pinv = vec![UNSET; n];
    let mut lp = Vec::with_capacity(n + 1);
    let mut li: Vec<usize> = Vec::with_capacity(a.nnz() * 2 + n);
    let mut lx: Vec<T> = Vec::with_capacity(a.nnz() * 2 + n);
    let mut up = Vec::with_capacity(n + 1);
    let mut ui: Vec<usize> = Vec::with_capacity(a.nnz() * 2 + n);
    let mut ux: Vec<T> = Vec::with_capacity(a.nnz() * 2 + n);

    let mut x = vec![T::zero(); n];
    let mut xi = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut off_diagonal_pivots = 0;

    for k in 0..n {
        lp.push(li.len());
        up.push(ui.len());
        let col = q[k];

        // Pattern of L \ A(:, col) via depth-first search in the graph of L.
        let mut top = n;
        for (r, _) in a.col(col) {
            if visited[r] {
                continue;
            }
            stack.push((r, 0));
            visited[r] = true;
            while let Some(top_entry) = stack.last_mut() {
                let (node, pos) = *top_entry;
                let piv = pinv[node];
                let (start, end) = if piv == UNSET {
                    (0, 0)
                } else {
                    // Skip the unit diagonal stored first.
                    (lp[piv] + 1, lp.get(piv + 1).copied().unwrap_or(li.len()))
                };
                let mut next = None;
                let mut p = start + pos;
                while p < end {
                    let child = li[p];
                    p += 1;
                    if !visited[child] {
                        next = Some(child);
                        break;
                    }
                }
                top_entry.1 = p - start;
                match next {
                    Some(child) => {
                        visited[child] = true;
                        stack.push((child, 0));
                    }
                    None => {
                        stack.pop();
                        top -= 1;
                        xi[top] = node;
                    }
                }
            }
        }

        // Numeric sparse triangular solve in topological order.
        for (r, v) in a.col(col) {
            x[r] = v;
        }
        for &j in &xi[top..n] {
            let piv = pinv[j];
            if piv == UNSET {
                continue;
            }
            let xj = x[j];
            if xj.is_zero() {
                continue;
            }
            let end = if piv + 1 < lp.len() { lp[piv + 1] } else { li.len() };
            for p in lp[piv] + 1..end {
                x[li[p]] -= lx[p] * xj;
            }
        }

        // Pivot selection among rows not yet pivotal.
        let mut ipiv = UNSET;
        let mut best = -1.0;
        for &i in &xi[top..n] {
            if pinv[i] == UNSET {
                let t = x[i].modulus();
                if t > best {
                    best = t;
                    ipiv = i;
                }
            } else {
                ui.push(pinv[i]);
                ux.push(x[i]);
            }
        }
        if ipiv == UNSET || best <= tiny || !best.is_finite() {
            return Err(Error::SingularMatrix { column: col });
        }
        if pinv[col] == UNSET && visited[col] && x[col].modulus() >= best * options.pivot_threshold {
            ipiv = col;
        }
        if ipiv != col {
            off_diagonal_pivots += 1;
        }
        let pivot = x[ipiv];
        ui.push(k);
        ux.push(pivot);
        pinv[ipiv] = k;
        li.push(ipiv);
        lx.push(T::one());
        for &i in &xi[top..n] {
            if pinv[i] == UNSET {
                li.push(i);
                lx.push(x[i] / pivot);
            }
            x[i] = T::zero();
            visited[i] = false;
        }
        // U rows must be sorted for the CSC invariant.
        sort_column(&mut ui, &mut ux, up[k]);
    }
    lp.push(li.len());
    up.push(ui.len());

    for r in li.iter_mut() {
        *r = pinv[*r];
    }
    let mut lnew_i = Vec::with_capacity(li.len());
    let mut lnew_x = Vec::with_capacity(lx.len());
    for k in 0..n {
        let mut col: Vec<(usize, T)> = (lp[k]..lp[k + 1]).map(|p| (li[p], lx[p])).collect();
        col.sort_by_key(|&(i, _)| i);
        for (i, v) in col {
            lnew_i.push(i);
            lnew_x.push(v);
        }
    }
    let l = SparseMat::try_new(n, n, lp, lnew_i, lnew_x)?;
    let u = SparseMat::try_new(n, n, up, ui, ux)?;
    Ok(LuFactor {
        n,
        l,
        u,
        pinv,
        q,
        options,
        off_diagonal_pivots,
    })
}

fn sort_column<T: Copy>(idx: &mut [usize], val: &mut [T], start: usize) {
    let mut pairs: Vec<(usize, T)> = idx[start..]
        .iter()
        .copied()
        .zip(val[start..].iter().copied())
        .collect();
    pairs.sort_by_key(|&(i, _)| i);
    for (o, (i, v)) in pairs.into_iter().enumerate() {
        idx[start + o] = i;
        val[start + o] = v;
    }
}

impl<T: Scalar> LuFactor<T> {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn options(&self) -> LuOptions {
        self.options
    }

    pub fn off_diagonal_pivots(&self) -> usize {
        self.off_diagonal_pivots
    }

    pub fn fill(&self) -> (usize, usize) {
        (self.l.nnz(), self.u.nnz())
    }

    /// Solves `A x = rhs`. The right-hand side may live in a larger field
    /// than the factors (real factors, complex right-hand side).
    pub fn solve<U>(&self, rhs: &[U]) -> Result<Vec<U>>
    where
        U: Scalar,
        T: Into<U>,
    {
        self.check_len(rhs.len())?;
        let n = self.n;
        let mut y = vec![U::zero(); n];
        for i in 0..n {
            y[self.pinv[i]] = rhs[i];
        }
        // L y = y, unit diagonal first in each column.
        for j in 0..n {
            let yj = y[j];
            if yj.is_zero() {
                continue;
            }
            for (i, v) in self.l.col(j).skip(1) {
                y[i] -= v.into() * yj;
            }
        }
        // U y = y, diagonal last in each column.
        for j in (0..n).rev() {
            let s = self.l_u_col_range(j);
            let diag: U = self.u.values()[s.end - 1].into();
            y[j] /= diag;
            let yj = y[j];
            for p in s.start..s.end - 1 {
                y[self.u.row_idx()[p]] -= self.u.values()[p].into() * yj;
            }
        }
        let mut x = vec![U::zero(); n];
        for k in 0..n {
            x[self.q[k]] = y[k];
        }
        Ok(x)
    }

    /// Solves `Aᵀ x = rhs` (plain transpose, no conjugation).
    pub fn solve_transpose<U>(&self, rhs: &[U]) -> Result<Vec<U>>
    where
        U: Scalar,
        T: Into<U>,
    {
        self.check_len(rhs.len())?;
        let n = self.n;
        let mut y: Vec<U> = (0..n).map(|k| rhs[self.q[k]]).collect();
        // Uᵀ y = y
        for j in 0..n {
            let s = self.l_u_col_range(j);
            let mut acc = y[j];
            for p in s.start..s.end - 1 {
                acc -= self.u.values()[p].into() * y[self.u.row_idx()[p]];
            }
            let diag: U = self.u.values()[s.end - 1].into();
            y[j] = acc / diag;
        }
        // Lᵀ y = y
        for j in (0..n).rev() {
            let mut acc = y[j];
            for (i, v) in self.l.col(j).skip(1) {
                acc -= v.into() * y[i];
            }
            y[j] = acc;
        }
        let mut x = vec![U::zero(); n];
        for i in 0..n {
            x[i] = y[self.pinv[i]];
        }
        Ok(x)
    }

    fn l_u_col_range(&self, j: usize) -> std::ops::Range<usize> {
        self.u.col_ptr()[j]..self.u.col_ptr()[j + 1]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::dims(format!(
                "right-hand side has length {len}, matrix order is {}",
                self.n
            )));
        }
        Ok(())
    }
}

/// Free-function form of [`LuFactor::solve`].
pub fn lu_solve<T, U>(f: &LuFactor<T>, rhs: &[U]) -> Result<Vec<U>>
where
    T: Scalar + Into<U>,
    U: Scalar,
{
    f.solve(rhs)
}
