use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{complex_schur, dense_inverse, to_complex, DenseMat};

fn is_identity(m: &DenseMat) -> bool {
    m.is_square()
        && m.iter()
            .enumerate()
            .all(|(k, v)| *v == if k % (m.nrows() + 1) == 0 { 1.0 } else { 0.0 })
}

/// `(X + Xᵀ) / 2`.
pub fn symmetrize(x: &DenseMat) -> DenseMat {
    (x + x.transpose()) * 0.5
}

/// Solves `Fᵀ X M + Mᵀ X F + Q = 0` for symmetric `X`, with `M` nonsingular.
///
/// The equation is moved to `Sᵀ X̃ + X̃ S + Q = 0` with `S = M⁻¹F`,
/// `X̃ = MᵀXM`, and solved on the complex Schur form of `S` by
/// column-wise substitution.
pub fn lyap_solve(f: &DenseMat, m: &DenseMat, q: &DenseMat) -> Result<DenseMat> {
    let n = f.nrows();
    if !f.is_square() || m.shape() != f.shape() || q.shape() != f.shape() {
        return Err(Error::dims(format!(
            "lyap_solve: F {:?}, M {:?}, Q {:?}",
            f.shape(),
            m.shape(),
            q.shape()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let m_inv = if is_identity(m) { None } else { Some(dense_inverse(m)?) };
    let s = match &m_inv {
        Some(mi) => mi * f,
        None => f.clone(),
    };
    let schur = complex_schur(&to_complex(&s))?;
    let t = &schur.t;
    let u = &schur.q;
    let qt = u.adjoint() * to_complex(q) * u;

    let scale = (0..n).map(|i| t[(i, i)].norm()).fold(0.0, f64::max).max(1.0);
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            let mut rhs = -qt[(i, j)];
            for k in 0..i {
                rhs -= t[(k, i)].conj() * y[(k, j)];
            }
            for k in 0..j {
                rhs -= y[(i, k)] * t[(k, j)];
            }
            let den = t[(i, i)].conj() + t[(j, j)];
            if den.norm() <= 100.0 * f64::EPSILON * scale {
                return Err(Error::UnsolvableLyapunov {
                    lambda: t[(i, i)],
                    mu: t[(j, j)],
                });
            }
            y[(i, j)] = rhs / den;
        }
    }
    let xt = (u * y * u.adjoint()).map(|z| z.re);
    let x = match &m_inv {
        Some(mi) => mi.transpose() * xt * mi,
        None => xt,
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure("Lyapunov solution is not finite".into()));
    }
    Ok(symmetrize(&x))
}

/// `‖FᵀXM + MᵀXF + Q‖_F`.
pub fn lyap_residual(f: &DenseMat, m: &DenseMat, q: &DenseMat, x: &DenseMat) -> f64 {
    let t = f.transpose() * x * m;
    (&t + t.transpose() + q).norm()
}
