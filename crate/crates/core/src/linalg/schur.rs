//! Complex Schur decomposition `A = Q T Qᴴ` and eigenvalue reordering.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::cabs1;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ComplexSchur {
    /// Upper triangular factor.
    pub t: DMatrix<Complex64>,
    /// Unitary factor.
    pub q: DMatrix<Complex64>,
}

impl ComplexSchur {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Right eigenvector of `T` for the diagonal entry `k`.
    pub(crate) fn triangular_right(&self, k: usize) -> DVector<Complex64> {
        let t = &self.t;
        let n = t.nrows();
        let lam = t[(k, k)];
        let smin = (f64::EPSILON * cabs1(lam)).max(f64::MIN_POSITIVE);
        let mut x = DVector::zeros(n);
        x[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for j in i + 1..=k {
                s += t[(i, j)] * x[j];
            }
            x[i] = -s / guarded(t[(i, i)] - lam, smin);
        }
        x
    }

    /// Row vector `w` with `w T = t_kk w`, returned as a column.
    pub(crate) fn triangular_left_row(&self, k: usize) -> DVector<Complex64> {
        let t = &self.t;
        let n = t.nrows();
        let lam = t[(k, k)];
        let smin = (f64::EPSILON * cabs1(lam)).max(f64::MIN_POSITIVE);
        let mut w = DVector::zeros(n);
        w[k] = Complex64::new(1.0, 0.0);
        for i in k + 1..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in k..i {
                s += w[j] * t[(j, i)];
            }
            w[i] = -s / guarded(t[(i, i)] - lam, smin);
        }
        w
    }
}

fn guarded(d: Complex64, smin: f64) -> Complex64 {
    if cabs1(d) < smin {
        Complex64::new(smin, 0.0)
    } else {
        d
    }
}

/// `(c, s, r)` with `[c s; -conj(s) c] [f; g] = [r; 0]` and real `c`.
fn lartg(f: Complex64, g: Complex64) -> (f64, Complex64, Complex64) {
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), f);
    }
    let fnrm = f.norm();
    if fnrm == 0.0 {
        return (0.0, g.conj() / gn, Complex64::new(gn, 0.0));
    }
    let norm = fnrm.hypot(gn);
    let phase = f / fnrm;
    (fnrm / norm, phase * g.conj() / norm, phase * norm)
}

/// `x ← c x + s y`, `y ← c y − conj(s) x`.
#[inline]
fn rot(x: &mut Complex64, y: &mut Complex64, c: f64, s: Complex64) {
    let (a, b) = (*x, *y);
    *x = a * c + s * b;
    *y = b * c - s.conj() * a;
}

fn rotate_rows(m: &mut DMatrix<Complex64>, i: usize, cols: std::ops::Range<usize>, c: f64, s: Complex64) {
    for j in cols {
        let (mut a, mut b) = (m[(i, j)], m[(i + 1, j)]);
        rot(&mut a, &mut b, c, s);
        m[(i, j)] = a;
        m[(i + 1, j)] = b;
    }
}

fn rotate_cols(m: &mut DMatrix<Complex64>, j: usize, rows: std::ops::Range<usize>, c: f64, s: Complex64) {
    for i in rows {
        let (mut a, mut b) = (m[(i, j)], m[(i, j + 1)]);
        rot(&mut a, &mut b, c, s);
        m[(i, j)] = a;
        m[(i, j + 1)] = b;
    }
}

fn hessenberg(a: &mut DMatrix<Complex64>, q: &mut DMatrix<Complex64>) {
    let n = a.nrows();
    for k in 0..n.saturating_sub(2) {
        let x: Vec<Complex64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let xnorm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x[0] / x[0].norm()
        };
        let alpha = -phase * xnorm;
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // Left: rows k+1.., P = I - 2 v vᴴ.
        for j in k..n {
            let mut s = Complex64::new(0.0, 0.0);
            for (o, vi) in v.iter().enumerate() {
                s += vi.conj() * a[(k + 1 + o, j)];
            }
            s *= 2.0;
            for (o, vi) in v.iter().enumerate() {
                a[(k + 1 + o, j)] -= vi * s;
            }
        }
        for i in k + 2..n {
            a[(i, k)] = Complex64::new(0.0, 0.0);
        }
        // Right: columns k+1.. of A and Q.
        for m in [&mut *a, &mut *q] {
            for i in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for (o, vi) in v.iter().enumerate() {
                    s += m[(i, k + 1 + o)] * vi;
                }
                s *= 2.0;
                for (o, vi) in v.iter().enumerate() {
                    m[(i, k + 1 + o)] -= s * vi.conj();
                }
            }
        }
    }
}

/// Complex Schur form by Hessenberg reduction and single-shift QR.
pub fn complex_schur(a: &DMatrix<Complex64>) -> Result<ComplexSchur> {
    if !a.is_square() {
        return Err(Error::dims(format!("Schur form of a {:?} matrix", a.shape())));
    }
    let n = a.nrows();
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ConvergenceFailure("non-finite matrix entry".into()));
    }
    let mut h = a.clone();
    let mut q = DMatrix::<Complex64>::identity(n, n);
    if n == 0 {
        return Ok(ComplexSchur { t: h, q });
    }
    hessenberg(&mut h, &mut q);

    let ulp = f64::EPSILON;
    let smlnum = f64::MIN_POSITIVE * (n as f64 / ulp);
    let max_its = 30 * n.max(10);
    let mut ihi = n - 1;
    while ihi > 0 {
        let mut deflated = false;
        for its in 0..max_its {
            let mut l = ihi;
            while l > 0 {
                let sub = cabs1(h[(l, l - 1)]);
                if sub <= smlnum {
                    break;
                }
                let tst = cabs1(h[(l - 1, l - 1)]) + cabs1(h[(l, l)]);
                if sub <= ulp * tst {
                    break;
                }
                l -= 1;
            }
            if l > 0 {
                h[(l, l - 1)] = Complex64::new(0.0, 0.0);
            }
            if l == ihi {
                deflated = true;
                break;
            }
            let shift = if its % 10 == 9 {
                h[(ihi, ihi)] + 0.75 * h[(ihi, ihi - 1)].re.abs()
            } else {
                wilkinson(
                    h[(ihi - 1, ihi - 1)],
                    h[(ihi - 1, ihi)],
                    h[(ihi, ihi - 1)],
                    h[(ihi, ihi)],
                )
            };
            for k in l..ihi {
                let (c, s) = if k == l {
                    let (c, s, _) = lartg(h[(l, l)] - shift, h[(l + 1, l)]);
                    (c, s)
                } else {
                    let (c, s, r) = lartg(h[(k, k - 1)], h[(k + 1, k - 1)]);
                    h[(k, k - 1)] = r;
                    h[(k + 1, k - 1)] = Complex64::new(0.0, 0.0);
                    (c, s)
                };
                let first = if k == l { l } else { k };
                rotate_rows(&mut h, k, first..n, c, s);
                let last = (k + 2).min(ihi);
                // Right multiplication by the conjugate transpose.
                rotate_cols(&mut h, k, 0..last + 1, c, s.conj());
                rotate_cols(&mut q, k, 0..n, c, s.conj());
            }
        }
        if !deflated {
            return Err(Error::ConvergenceFailure(format!(
                "QR iteration did not converge for eigenvalue {ihi}"
            )));
        }
        ihi -= 1;
    }
    for j in 0..n {
        for i in j + 1..n {
            h[(i, j)] = Complex64::new(0.0, 0.0);
        }
    }
    Ok(ComplexSchur { t: h, q })
}

fn wilkinson(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let p = (a - d) * 0.5;
    let disc = (p * p + b * c).sqrt();
    let m1 = d + p + disc;
    let m2 = d + p - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// Moves the eigenvalues flagged in `select` to the leading diagonal
/// positions, keeping their relative order.
pub fn reorder_schur(schur: &mut ComplexSchur, select: &[bool]) -> Result<usize> {
    let n = schur.t.nrows();
    if select.len() != n {
        return Err(Error::dims(format!(
            "selection has {} flags for order {n}",
            select.len()
        )));
    }
    let mut sel = select.to_vec();
    let mut ks = 0;
    for j in 0..n {
        if !sel[j] {
            continue;
        }
        for k in (ks..j).rev() {
            swap_adjacent(schur, k);
            sel.swap(k, k + 1);
        }
        ks += 1;
    }
    Ok(ks)
}

fn swap_adjacent(schur: &mut ComplexSchur, k: usize) {
    let n = schur.t.nrows();
    let t = &mut schur.t;
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (c, s, _) = lartg(t[(k, k + 1)], t22 - t11);
    if k + 2 < n {
        rotate_rows(t, k, k + 2..n, c, s);
    }
    rotate_cols(t, k, 0..k, c, s.conj());
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    rotate_cols(&mut schur.q, k, 0..n, c, s.conj());
}
