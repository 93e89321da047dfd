use nalgebra::DMatrix;
use num_complex::Complex64;

use super::care::IMAG_AXIS_TOL;
use super::lyap::{lyap_solve, symmetrize};
use crate::descriptor::DenseGeneralized;
use crate::error::{Error, Result};
use crate::linalg::{
    complex_schur, dense_inverse, eig_pencil_dense, pencil_eigenvalues, reorder_schur,
    spectral_abscissa, to_complex, DenseMat,
};

/// Output of [`bernoulli_stabilize`].
#[derive(Clone, Debug)]
pub struct InitialFeedback {
    /// `p × n1`; exactly zero when the open loop is already stable.
    pub k0: DenseMat,
    /// Abscissa of `(𝒜 − ℬK0, ℰ)`.
    pub stabilized_abscissa: f64,
    pub unstable_count_before: usize,
}

/// Feedback that mirrors the unstable finite eigenvalues of `(𝒜, ℰ)` into
/// the left half-plane and leaves the stable ones in place.
///
/// Works in the coordinates `F = ℰ⁻¹𝒜`, `B̃ = ℰ⁻¹ℬ`: the Bernoulli solution
/// `P` of `FᵀP + PF − PB̃B̃ᵀP = 0` lives on the left invariant subspace of the
/// unstable eigenvalues, where `P = U Z⁻¹ Uᵀ` with `Z` from a small
/// Lyapunov equation. `K0 = B̃ᵀP`, which equals `ℬᵀXℰ` for `P = ℰᵀXℰ`.
pub fn bernoulli_stabilize(g: &DenseGeneralized) -> Result<InitialFeedback> {
    let n = g.a.nrows();
    let p = g.b.ncols();
    let eig = pencil_eigenvalues(&g.a, &g.e)?;
    if let Some(z) = eig.iter().find(|z| z.re.abs() <= IMAG_AXIS_TOL) {
        return Err(Error::ImaginaryAxisEigenvalue { eigenvalue: *z });
    }
    let k = eig.iter().filter(|z| z.re > 0.0).count();
    if k == 0 {
        return Ok(InitialFeedback {
            k0: DMatrix::zeros(p, n),
            stabilized_abscissa: spectral_abscissa(&eig),
            unstable_count_before: 0,
        });
    }

    let einv = dense_inverse(&g.e)?;
    let f = &einv * &g.a;
    let bt = &einv * &g.b;

    let mut schur = complex_schur(&to_complex(&f.transpose()))?;
    let select: Vec<bool> = schur.eigenvalues().iter().map(|z| z.re > 0.0).collect();
    let kk = reorder_schur(&mut schur, &select)?;
    debug_assert_eq!(kk, k);
    let qk = schur.q.columns(0, k);
    let mut both = DMatrix::<f64>::zeros(n, 2 * k);
    both.view_mut((0, 0), (n, k)).copy_from(&qk.map(|z| z.re));
    both.view_mut((0, k), (n, k)).copy_from(&qk.map(|z| z.im));
    let ul = pivoted_basis(&both, k);

    let fu = ul.transpose() * &f * &ul;
    let bu = ul.transpose() * &bt;

    // PBH test on the projected unstable block.
    let ev_u = eig_pencil_dense(&fu, &DMatrix::identity(k, k))?;
    let bun = bu.norm().max(f64::MIN_POSITIVE);
    for (i, lam) in ev_u.eigenvalues.iter().enumerate() {
        let y = ev_u.left.column(i);
        let yb = y.adjoint() * to_complex(&bu);
        if yb.norm() <= 1e-10 * bun {
            return Err(Error::Unstabilizable { eigenvalue: *lam });
        }
    }

    let z = lyap_solve(&fu.transpose(), &DMatrix::identity(k, k), &(-(&bu * bu.transpose())))?;
    let zeig = z.clone().symmetric_eigenvalues();
    let zmax = zeig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if zeig.iter().any(|v| *v <= 1e-13 * zmax) {
        let worst = ev_u
            .eigenvalues
            .iter()
            .copied()
            .fold(Complex64::new(0.0, 0.0), |a, b| if b.re > a.re { b } else { a });
        return Err(Error::Unstabilizable { eigenvalue: worst });
    }
    let y = dense_inverse(&z)?;
    let pmat = symmetrize(&(&ul * symmetrize(&y) * ul.transpose()));
    let k0 = bt.transpose() * pmat;

    let after = pencil_eigenvalues(&(&g.a - &g.b * &k0), &g.e)?;
    let stabilized_abscissa = spectral_abscissa(&after);
    if !(stabilized_abscissa < 0.0) {
        return Err(Error::ConvergenceFailure(format!(
            "Bernoulli feedback leaves abscissa {stabilized_abscissa:.3e}"
        )));
    }
    Ok(InitialFeedback {
        k0,
        stabilized_abscissa,
        unstable_count_before: k,
    })
}

/// Orthonormal basis of `k` columns of `m`, picked greedily by largest
/// remaining norm (Gram-Schmidt with column pivoting, two passes).
fn pivoted_basis(m: &DenseMat, k: usize) -> DenseMat {
    let n = m.nrows();
    let mut rest: Vec<_> = m.column_iter().map(|c| c.clone_owned()).collect();
    let mut q = DMatrix::<f64>::zeros(n, k);
    for j in 0..k {
        let (best, _) = rest
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let mut v = rest.swap_remove(best);
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let h = qi.dot(&v);
                v -= qi * h;
            }
        }
        v /= v.norm();
        for c in rest.iter_mut() {
            let h = v.dot(c);
            *c -= &v * h;
        }
        q.set_column(j, &v);
    }
    q
}
