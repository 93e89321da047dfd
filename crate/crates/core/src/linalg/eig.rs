use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::dense::{dense_inverse, to_complex};
use super::schur::complex_schur;
use super::{cabs1, cmp_re_im};
use crate::error::{Error, Result};

/// Eigen-triplets of a real pencil `λE − A`.
#[derive(Clone, Debug)]
pub struct PencilEig {
    /// Sorted by real part, then imaginary part. Closed under conjugation.
    pub eigenvalues: Vec<Complex64>,
    /// `A z = λ E z`, one unit column per eigenvalue.
    pub right: DMatrix<Complex64>,
    /// `yᴴ A = λ yᴴ E`, one unit column per eigenvalue.
    pub left: DMatrix<Complex64>,
}

/// Condition number of `E` above which the pencil is treated as singular.
const E_COND_LIMIT: f64 = 1e14;

fn finite_or_fail(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure("non-finite matrix entry".into()));
    }
    Ok(())
}

/// Eigenvalues, right and left eigenvectors of `(A, E)` for nonsingular `E`.
pub fn eig_pencil_dense(a: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<PencilEig> {
    let n = a.nrows();
    if !a.is_square() || e.shape() != a.shape() {
        return Err(Error::dims(format!(
            "pencil needs equal square matrices, got {:?} and {:?}",
            a.shape(),
            e.shape()
        )));
    }
    finite_or_fail(a)?;
    finite_or_fail(e)?;
    let einv = dense_inverse(e)?;
    let cond = one_norm(e) * one_norm(&einv);
    if cond > E_COND_LIMIT {
        return Err(Error::SingularPencil { cond });
    }
    let m = &einv * a;
    let schur = complex_schur(&to_complex(&m))?;
    let mut lam = schur.eigenvalues();
    let einv_h = to_complex(&einv.transpose());
    let mut right: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    let mut left: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    for k in 0..n {
        right.push(&schur.q * schur.triangular_right(k));
        let what = schur.triangular_left_row(k);
        let u = &schur.q * what.map(|z| z.conj());
        left.push(&einv_h * u);
    }

    // Make the spectrum exactly closed under conjugation.
    let scale = lam.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lam[j].im.total_cmp(&lam[i].im));
    let mut matched = vec![false; n];
    for &i in &order {
        if matched[i] {
            continue;
        }
        let thr = 1e-8 * lam[i].norm().max(1.0);
        if lam[i].im <= thr {
            continue;
        }
        let target = lam[i].conj();
        let partner = (0..n)
            .filter(|&j| j != i && !matched[j] && lam[j].im < 0.0)
            .min_by(|&a, &b| (lam[a] - target).norm().total_cmp(&(lam[b] - target).norm()));
        if let Some(j) = partner {
            if (lam[j] - target).norm() <= 1e-6 * scale {
                matched[i] = true;
                matched[j] = true;
                lam[j] = target;
                right[j] = right[i].map(|z| z.conj());
                left[j] = left[i].map(|z| z.conj());
            }
        }
    }
    for k in 0..n {
        if matched[k] {
            continue;
        }
        if lam[k].im.abs() > 1e-6 * scale {
            return Err(Error::ConvergenceFailure(format!(
                "eigenvalue {} has no conjugate partner",
                lam[k]
            )));
        }
        lam[k] = Complex64::new(lam[k].re, 0.0);
        right[k] = realify(&right[k]);
        left[k] = realify(&left[k]);
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| cmp_re_im(&lam[i], &lam[j]));
    let eigenvalues = idx.iter().map(|&i| lam[i]).collect();
    let right = columns(n, idx.iter().map(|&i| unit(&right[i])));
    let left = columns(n, idx.iter().map(|&i| unit(&left[i])));
    Ok(PencilEig {
        eigenvalues,
        right,
        left,
    })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn columns(n: usize, cols: impl Iterator<Item = DVector<Complex64>>) -> DMatrix<Complex64> {
    let cols: Vec<_> = cols.collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn unit(v: &DVector<Complex64>) -> DVector<Complex64> {
    let nrm = v.norm();
    if nrm > 0.0 {
        v / Complex64::new(nrm, 0.0)
    } else {
        v.clone()
    }
}

/// Rotates the phase so the largest entry is real, then drops the imaginary part.
fn realify(v: &DVector<Complex64>) -> DVector<Complex64> {
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, z)| if cabs1(*z) > acc.1 { (i, cabs1(*z)) } else { acc });
    let p = v[imax];
    let rot = if p.norm() > 0.0 { p.conj() / p.norm() } else { Complex64::new(1.0, 0.0) };
    v.map(|z| Complex64::new((z * rot).re, 0.0))
}

pub fn pencil_eigenvalues(a: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    Ok(eig_pencil_dense(a, e)?.eigenvalues)
}

pub fn eigenvalues_dense(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    pencil_eigenvalues(a, &DMatrix::identity(n, n))
}

/// The `n_finite` finite eigenvalues of a pencil with singular `E`, via the
/// shift-and-invert map `μ = 1/(λ − σ)` which sends infinite eigenvalues to zero.
pub fn finite_pencil_eigenvalues(
    a: &DMatrix<f64>,
    e: &DMatrix<f64>,
    n_finite: usize,
) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if !a.is_square() || e.shape() != a.shape() || n_finite > n {
        return Err(Error::dims("finite_pencil_eigenvalues: bad shapes"));
    }
    finite_or_fail(a)?;
    finite_or_fail(e)?;
    let mut last_err = None;
    for sigma in [0.3183098861837907, -1.4142135623730951, 2.718281828459045] {
        let shifted = a - e * sigma;
        let inv = match dense_inverse(&shifted) {
            Ok(m) => m,
            Err(err) => {
                last_err = Some(err);
                continue;
            }
        };
        let f = inv * e;
        let schur = complex_schur(&to_complex(&f))?;
        let mut mu = schur.eigenvalues();
        mu.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
        let mut lam: Vec<Complex64> = mu[..n_finite]
            .iter()
            .map(|m| Complex64::new(sigma, 0.0) + Complex64::new(1.0, 0.0) / m)
            .collect();
        close_under_conjugation(&mut lam);
        lam.sort_by(cmp_re_im);
        return Ok(lam);
    }
    Err(last_err.unwrap_or(Error::SingularPencil { cond: f64::INFINITY }))
}

/// Snaps nearly conjugate pairs together and nearly real values onto the axis.
fn close_under_conjugation(lam: &mut [Complex64]) {
    let n = lam.len();
    let mut matched = vec![false; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lam[j].im.total_cmp(&lam[i].im));
    for &i in &order {
        let thr = 1e-8 * lam[i].norm().max(1.0);
        if matched[i] || lam[i].im <= thr {
            continue;
        }
        let target = lam[i].conj();
        if let Some(j) = (0..n)
            .filter(|&j| j != i && !matched[j] && lam[j].im < 0.0)
            .min_by(|&a, &b| (lam[a] - target).norm().total_cmp(&(lam[b] - target).norm()))
        {
            matched[i] = true;
            matched[j] = true;
            let avg = (lam[i] + lam[j].conj()) * 0.5;
            lam[i] = avg;
            lam[j] = avg.conj();
        }
    }
    for k in 0..n {
        if !matched[k] {
            lam[k].im = 0.0;
        }
    }
}

/// `max Re λ`, or `-∞` for an empty spectrum.
pub fn spectral_abscissa(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two_known() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, 3.0]);
        let e = DMatrix::identity(2, 2);
        let pe = eig_pencil_dense(&a, &e).unwrap();
        assert!((pe.eigenvalues[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((pe.eigenvalues[1] - Complex64::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn generalized_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -3.0]));
        let e = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let ev = pencil_eigenvalues(&a, &e).unwrap();
        assert!((ev[0].re + 3.0).abs() < 1e-14 && (ev[1].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn singular_e_rejected() {
        let a = DMatrix::identity(2, 2);
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(eig_pencil_dense(&a, &e), Err(Error::SingularPencil { .. })));
    }

    /// Coefficients of det(λE − A) by Faddeev-LeVerrier on E⁻¹A, evaluated at the
    /// computed eigenvalues; independent of the QR path.
    fn char_poly_residual(m: &DMatrix<f64>, lam: Complex64) -> f64 {
        let n = m.nrows();
        let mut coeffs = vec![1.0];
        let mut mk = DMatrix::<f64>::zeros(n, n);
        let id = DMatrix::<f64>::identity(n, n);
        for k in 1..=n {
            mk = m * &mk + &id * coeffs[k - 1];
            let ck = -(m * &mk).trace() / k as f64;
            coeffs.push(ck);
        }
        let mut p = Complex64::new(0.0, 0.0);
        for c in &coeffs {
            p = p * lam + c;
        }
        let mut scale = 0.0;
        let mut pw = 1.0;
        for c in coeffs.iter().rev() {
            scale += c.abs() * pw;
            pw *= lam.norm();
        }
        p.norm() / scale
    }

    #[test]
    fn matches_characteristic_polynomial_and_triplets() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 7;
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let e = DMatrix::<f64>::identity(n, n)
            + DMatrix::from_fn(n, n, |_, _| 0.1 * (rng.random::<f64>() - 0.5));
        let pe = eig_pencil_dense(&a, &e).unwrap();
        let m = e.clone().lu().solve(&a).unwrap();
        let ac = to_complex(&a);
        let ec = to_complex(&e);
        for (k, lam) in pe.eigenvalues.iter().enumerate() {
            assert!(char_poly_residual(&m, *lam) < 1e-10);
            let z = pe.right.column(k);
            let r = &ac * z - &ec * z * *lam;
            assert!(r.norm() < 1e-10);
            let y = pe.left.column(k);
            let l = y.adjoint() * &ac - y.adjoint() * &ec * *lam;
            assert!(l.norm() < 1e-10);
        }
        // Conjugation closure is exact.
        for lam in &pe.eigenvalues {
            assert!(pe.eigenvalues.iter().any(|m| *m == lam.conj()));
        }
    }

    #[test]
    fn finite_eigenvalues_of_block_pencil() {
        // Block pencil [I 0; 0 0] - [A1 A2; A3 A4] has the Schur complement spectrum.
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.5, 1.0, 0.0, -2.0, 0.0, 1.0, 0.0, 2.0]);
        let mut e = DMatrix::zeros(3, 3);
        e[(0, 0)] = 1.0;
        e[(1, 1)] = 1.0;
        let ev = finite_pencil_eigenvalues(&a, &e, 2).unwrap();
        // Schur complement: A11 - A12 A22^-1 A21 with A22 = 2.
        let s = DMatrix::from_row_slice(2, 2, &[-1.0 - 0.5, 0.5, 0.0, -2.0]);
        let oracle = eigenvalues_dense(&s).unwrap();
        for (x, y) in ev.iter().zip(&oracle) {
            assert!((x - y).norm() < 1e-10, "{x} vs {y}");
        }
    }
}
