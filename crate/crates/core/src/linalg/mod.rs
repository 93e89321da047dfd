//! Dense and sparse linear-algebra kernels.
//!
//! Dense matrices are plain `nalgebra` matrices. Everything the rest of the
//! crate needs beyond that lives here: compressed-column storage, a
//! left-looking sparse LU that works for real and complex scalars, an
//! orthonormalizer with rank dropping, a complex Schur form with eigenvalue
//! reordering, and a dense eigensolver for regular pencils `(A, E)` with
//! nonsingular `E`.

mod dense;
mod eig;
mod lu;
mod ordering;
mod schur;
mod sparse;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

pub use dense::{
    dense_inverse, dense_solve, max_abs, orthonormality_error, qr_orth, to_complex, Orthonormal,
    QR_RANK_TOL,
};
pub use eig::{
    eig_pencil_dense, eigenvalues_dense, finite_pencil_eigenvalues, pencil_eigenvalues,
    spectral_abscissa, PencilEig,
};
pub use lu::{lu_solve, sparse_lu, sparse_lu_with, ColumnOrdering, LuFactor, LuOptions};
pub use ordering::minimum_degree;
pub use schur::{complex_schur, reorder_schur, ComplexSchur};
pub use sparse::SparseMat;

/// Real dense matrix.
pub type DenseMat = DMatrix<f64>;
/// Complex dense matrix.
pub type CDenseMat = DMatrix<Complex64>;

/// Field scalars the generic kernels run over: `f64` and `Complex64`.
pub trait Scalar: ComplexField<RealField = f64> + Copy {}

impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `|re| + |im|`, the cheap modulus LAPACK uses for convergence tests.
#[inline]
pub(crate) fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Orders complex numbers by real part, then imaginary part.
pub fn cmp_re_im(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}
