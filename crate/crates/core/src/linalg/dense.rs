use nalgebra::DMatrix;
use num_complex::Complex64;

use super::Scalar;
use crate::error::{Error, Result};

/// Relative rank tolerance used by [`qr_orth`].
pub const QR_RANK_TOL: f64 = 1e-12;

/// Orthonormal basis produced by [`qr_orth`].
#[derive(Clone, Debug)]
pub struct Orthonormal {
    pub q: DMatrix<f64>,
    /// Input columns that were numerically dependent on earlier ones.
    pub dropped: Vec<usize>,
    pub rank_tol: f64,
}

impl Orthonormal {
    pub fn rank(&self) -> usize {
        self.q.ncols()
    }
}

/// Orthonormalizes the columns of `cols` by classical Gram-Schmidt with one
/// full reorthogonalization pass.
///
/// Each column is scaled to unit norm first; a column whose remainder after
/// projection falls below [`QR_RANK_TOL`] is dropped.
pub fn qr_orth(cols: &DMatrix<f64>) -> Result<Orthonormal> {
    let (n, k) = cols.shape();
    if n < k {
        return Err(Error::dims(format!(
            "qr_orth needs nrows >= ncols, got {n}x{k}"
        )));
    }
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(k);
    let mut dropped = Vec::new();
    for j in 0..k {
        let c = cols.column(j);
        let norm0 = c.norm();
        if norm0 == 0.0 || !norm0.is_finite() {
            dropped.push(j);
            continue;
        }
        let mut v = c / norm0;
        for _ in 0..2 {
            let coeffs: Vec<f64> = basis.iter().map(|q| q.dot(&v)).collect();
            for (q, h) in basis.iter().zip(coeffs) {
                v.axpy(-h, q, 1.0);
            }
        }
        let r = v.norm();
        if r <= QR_RANK_TOL {
            dropped.push(j);
            continue;
        }
        v /= r;
        // A third pass when heavy cancellation happened.
        if r < 1e-3 {
            let coeffs: Vec<f64> = basis.iter().map(|q| q.dot(&v)).collect();
            for (q, h) in basis.iter().zip(coeffs) {
                v.axpy(-h, q, 1.0);
            }
            let r2 = v.norm();
            v /= r2;
        }
        basis.push(v);
    }
    let q = if basis.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&basis)
    };
    Ok(Orthonormal {
        q,
        dropped,
        rank_tol: QR_RANK_TOL,
    })
}

/// `max |QᵀQ − I|`.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let mut e: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            e = e.max((g[(i, j)] - target).abs());
        }
    }
    e
}

pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.modulus()))
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn one_norm<T: Scalar>(m: &DMatrix<T>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse with a 1-norm condition check; fails with `SingularPencil` when
/// the estimate exceeds `1/ε` (or on an exact zero pivot).
pub fn dense_inverse<T: Scalar>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !m.is_square() {
        return Err(Error::dims(format!("inverse of a {:?} matrix", m.shape())));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(m.clone());
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularPencil { cond: f64::INFINITY })?;
    let cond = one_norm(m) * one_norm(&inv);
    if !cond.is_finite() || cond > 1.0 / f64::EPSILON {
        return Err(Error::SingularPencil { cond });
    }
    Ok(inv)
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn dense_solve<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() || a.nrows() != b.nrows() {
        return Err(Error::dims(format!(
            "cannot solve {:?} system with {:?} right-hand side",
            a.shape(),
            b.shape()
        )));
    }
    let lu = a.clone().lu();
    let u_diag_min = (0..a.nrows())
        .map(|i| lu.u()[(i, i)].modulus())
        .fold(f64::INFINITY, f64::min);
    if !(u_diag_min > f64::EPSILON * max_abs(a)) {
        let col = (0..a.nrows())
            .find(|&i| lu.u()[(i, i)].modulus() <= f64::EPSILON * max_abs(a))
            .unwrap_or(0);
        return Err(Error::SingularMatrix { column: col });
    }
    lu.solve(b).ok_or(Error::SingularMatrix { column: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthonormal_input_keeps_span() {
        let q0 = DMatrix::<f64>::identity(5, 3);
        let o = qr_orth(&q0).unwrap();
        assert_eq!(o.rank(), 3);
        assert!(orthonormality_error(&o.q) <= 1e-12);
        assert!((o.q.clone() - q0).abs().max() <= 1e-15);
    }

    #[test]
    fn duplicate_columns_collapse() {
        let mut m = DMatrix::<f64>::zeros(4, 2);
        m.set_column(0, &nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]));
        m.set_column(1, &nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]));
        let o = qr_orth(&m).unwrap();
        assert_eq!(o.rank(), 1);
        assert_eq!(o.dropped, vec![1]);
    }

    #[test]
    fn random_span_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = DMatrix::<f64>::from_fn(30, 5, |_, _| rng.random::<f64>() - 0.5);
        let o = qr_orth(&m).unwrap();
        assert_eq!(o.rank(), 5);
        assert!(orthonormality_error(&o.q) <= 1e-12);
        // Projection residual of each input column onto span(Q).
        let proj = &o.q * (o.q.transpose() * &m);
        for j in 0..5 {
            let r = (m.column(j) - proj.column(j)).norm() / m.column(j).norm();
            assert!(r <= 1e-10, "column {j} residual {r}");
        }
    }

    #[test]
    fn wide_input_rejected() {
        assert!(qr_orth(&DMatrix::<f64>::zeros(2, 3)).is_err());
    }

    #[test]
    fn inverse_flags_singular() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(dense_inverse(&s), Err(Error::SingularPencil { .. })));
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let inv = dense_inverse(&a).unwrap();
        assert_eq!(inv[(1, 1)], 0.25);
    }
}
