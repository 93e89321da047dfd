use nalgebra::DMatrix;
use num_complex::Complex64;

use super::lyap::{lyap_solve, symmetrize};
use crate::error::{Error, Result};
use crate::linalg::{
    complex_schur, dense_inverse, eig_pencil_dense, reorder_schur, spectral_abscissa, to_complex,
    DenseMat,
};

/// Real parts at or below this magnitude count as imaginary-axis eigenvalues.
pub const IMAG_AXIS_TOL: f64 = 1e-9;

/// Stabilizing solution of `AᵀXE + EᵀXA − EᵀXBBᵀXE + CᵀC = 0`.
#[derive(Clone, Debug)]
pub struct CareSolution {
    pub x: DenseMat,
    /// Frobenius norm of the recomputed residual.
    pub residual_norm: f64,
    /// Largest real part of the closed-loop pencil `(A − BBᵀXE, E)`.
    pub closed_loop_abscissa: f64,
    pub closed_loop_eigenvalues: Vec<Complex64>,
    /// Whether the Newton-Kleinman polish was kept.
    pub refined: bool,
}

/// `‖AᵀXE + EᵀXA − EᵀXBBᵀXE + CᵀC‖_F`.
pub fn care_residual(e: &DenseMat, a: &DenseMat, b: &DenseMat, c: &DenseMat, x: &DenseMat) -> f64 {
    let axe = a.transpose() * x * e;
    let bxe = b.transpose() * x * e;
    (&axe + axe.transpose() - bxe.transpose() * &bxe + c.transpose() * c).norm()
}

/// The acceptance bound `1e-8 · max(1, ‖A‖², ‖X‖²‖B‖²)` (Frobenius norms).
pub fn care_residual_bound(a: &DenseMat, b: &DenseMat, x: &DenseMat) -> f64 {
    let xn = x.norm();
    let bn = b.norm();
    1e-8 * 1f64.max(a.norm().powi(2)).max(xn * bn * bn * xn)
}

pub fn care_solve(e: &DenseMat, a: &DenseMat, b: &DenseMat, c: &DenseMat) -> Result<CareSolution> {
    let r = a.nrows();
    if !a.is_square() || e.shape() != a.shape() || b.nrows() != r || c.ncols() != r {
        return Err(Error::dims(format!(
            "care_solve: E {:?}, A {:?}, B {:?}, C {:?}",
            e.shape(),
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    if r == 0 {
        return Ok(CareSolution {
            x: DMatrix::zeros(0, 0),
            residual_norm: 0.0,
            closed_loop_abscissa: f64::NEG_INFINITY,
            closed_loop_eigenvalues: Vec::new(),
            refined: false,
        });
    }
    let einv = dense_inverse(e)?;
    let f = &einv * a;
    let bt = &einv * b;
    let g = &bt * bt.transpose();
    let q = c.transpose() * c;

    let mut h = DMatrix::<f64>::zeros(2 * r, 2 * r);
    h.view_mut((0, 0), (r, r)).copy_from(&f);
    h.view_mut((0, r), (r, r)).copy_from(&(-&g));
    h.view_mut((r, 0), (r, r)).copy_from(&(-&q));
    h.view_mut((r, r), (r, r)).copy_from(&(-f.transpose()));

    let mut schur = complex_schur(&to_complex(&h))?;
    let ev = schur.eigenvalues();
    if let Some(z) = ev.iter().find(|z| z.re.abs() <= IMAG_AXIS_TOL) {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian eigenvalue {z} lies on the imaginary axis"
        )));
    }
    let select: Vec<bool> = ev.iter().map(|z| z.re < 0.0).collect();
    let stable = reorder_schur(&mut schur, &select)?;
    if stable != r {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian has {stable} stable eigenvalues, expected {r}"
        )));
    }
    let u1 = schur.q.view((0, 0), (r, r)).clone_owned();
    let u2 = schur.q.view((r, 0), (r, r)).clone_owned();
    let u1_inv = dense_inverse(&u1).map_err(|_| {
        Error::NoStabilizingSolution("stable invariant subspace is not a graph".into())
    })?;
    let xt = (u2 * u1_inv).map(|z| z.re);
    let mut x = symmetrize(&(einv.transpose() * symmetrize(&xt) * &einv));
    let mut residual = care_residual(e, a, b, c, &x);

    // One Newton-Kleinman step polishes the subspace solution.
    let mut refined = false;
    let k = b.transpose() * &x * e;
    let ak = a - b * &k;
    if let Ok(xn) = lyap_solve(&ak, e, &(&q + k.transpose() * &k)) {
        let rn = care_residual(e, a, b, c, &xn);
        if rn.is_finite() && rn < residual {
            x = xn;
            residual = rn;
            refined = true;
        }
    }

    if !(residual <= care_residual_bound(a, b, &x)) {
        return Err(Error::ConvergenceFailure(format!(
            "CARE residual {residual:.3e} exceeds {:.3e}",
            care_residual_bound(a, b, &x)
        )));
    }
    let closed = a - b * (b.transpose() * &x * e);
    let closed_loop_eigenvalues = eig_pencil_dense(&closed, e)?.eigenvalues;
    let closed_loop_abscissa = spectral_abscissa(&closed_loop_eigenvalues);
    if !(closed_loop_abscissa < 0.0) {
        return Err(Error::ConvergenceFailure(format!(
            "closed-loop abscissa {closed_loop_abscissa:.3e} is not negative"
        )));
    }
    Ok(CareSolution {
        x,
        residual_norm: residual,
        closed_loop_abscissa,
        closed_loop_eigenvalues,
        refined,
    })
}
