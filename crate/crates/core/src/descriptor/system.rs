use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    dense_inverse, sparse_lu, to_complex, CDenseMat, DenseMat, LuFactor, SparseMat,
};

/// Environment variable overriding the default dense-oracle cap.
pub const ORACLE_CAP_ENV: &str = "DAE_STAB_ORACLE_CAP";
pub const DEFAULT_ORACLE_CAP: usize = 500;

/// Largest total order `n1 + n2` for which dense oracles may be formed.
pub fn oracle_cap() -> usize {
    std::env::var(ORACLE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ORACLE_CAP)
}

/// The ten blocks of an index-1 descriptor system
///
/// ```text
/// E1 x1' = J1 x1 + J2 x2 + B1 u
///      0 = J3 x1 + J4 x2 + B2 u
///      y = C1 x1 + C2 x2 + D u
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct SystemBlocks {
    pub e1: SparseMat,
    pub j1: SparseMat,
    pub j2: SparseMat,
    pub j3: SparseMat,
    pub j4: SparseMat,
    pub b1: SparseMat,
    pub b2: SparseMat,
    pub c1: SparseMat,
    pub c2: SparseMat,
    pub d: DenseMat,
}

/// A validated index-1 system with cached factorizations of `J4` and `E1`.
///
/// Immutable after construction, so shifted solves may run concurrently.
#[derive(Clone, Debug)]
pub struct Index1System {
    blocks: SystemBlocks,
    n1: usize,
    n2: usize,
    p: usize,
    m: usize,
    j4_lu: LuFactor<f64>,
    e1_lu: LuFactor<f64>,
}

fn expect_shape(name: &str, got: (usize, usize), want: (usize, usize)) -> Result<()> {
    if got != want {
        return Err(Error::dims(format!(
            "{name} is {}x{}, expected {}x{}",
            got.0, got.1, want.0, want.1
        )));
    }
    Ok(())
}

impl Index1System {
    pub fn new(blocks: SystemBlocks) -> Result<Self> {
        let n1 = blocks.e1.nrows();
        let n2 = blocks.j4.nrows();
        let p = blocks.b1.ncols();
        let m = blocks.c1.nrows();
        expect_shape("E1", blocks.e1.shape(), (n1, n1))?;
        expect_shape("J1", blocks.j1.shape(), (n1, n1))?;
        expect_shape("J2", blocks.j2.shape(), (n1, n2))?;
        expect_shape("J3", blocks.j3.shape(), (n2, n1))?;
        expect_shape("J4", blocks.j4.shape(), (n2, n2))?;
        expect_shape("B1", blocks.b1.shape(), (n1, p))?;
        expect_shape("B2", blocks.b2.shape(), (n2, p))?;
        expect_shape("C1", blocks.c1.shape(), (m, n1))?;
        expect_shape("C2", blocks.c2.shape(), (m, n2))?;
        expect_shape("D", blocks.d.shape(), (m, p))?;
        if n1 == 0 {
            return Err(Error::dims("system has no differential states"));
        }
        let j4_lu = sparse_lu(&blocks.j4).map_err(|e| match e {
            Error::SingularMatrix { column } => Error::SingularJ4 { column },
            other => other,
        })?;
        let e1_lu = sparse_lu(&blocks.e1).map_err(|e| match e {
            Error::SingularMatrix { column } => Error::SingularE1 { column },
            other => other,
        })?;
        Ok(Self {
            blocks,
            n1,
            n2,
            p,
            m,
            j4_lu,
            e1_lu,
        })
    }

    pub fn blocks(&self) -> &SystemBlocks {
        &self.blocks
    }

    pub fn into_blocks(self) -> SystemBlocks {
        self.blocks
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn m(&self) -> usize {
        self.m
    }
    /// Total order `n1 + n2`.
    pub fn order(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn e1(&self) -> &SparseMat {
        &self.blocks.e1
    }
    pub fn j1(&self) -> &SparseMat {
        &self.blocks.j1
    }
    pub fn j2(&self) -> &SparseMat {
        &self.blocks.j2
    }
    pub fn j3(&self) -> &SparseMat {
        &self.blocks.j3
    }
    pub fn j4(&self) -> &SparseMat {
        &self.blocks.j4
    }
    pub fn b1(&self) -> &SparseMat {
        &self.blocks.b1
    }
    pub fn b2(&self) -> &SparseMat {
        &self.blocks.b2
    }
    pub fn c1(&self) -> &SparseMat {
        &self.blocks.c1
    }
    pub fn c2(&self) -> &SparseMat {
        &self.blocks.c2
    }
    pub fn d(&self) -> &DenseMat {
        &self.blocks.d
    }

    pub fn j4_lu(&self) -> &LuFactor<f64> {
        &self.j4_lu
    }
    pub fn e1_lu(&self) -> &LuFactor<f64> {
        &self.e1_lu
    }

    /// `J4⁻¹ X` column by column through the cached factorization.
    pub fn j4_solve_dense(&self, x: &DenseMat) -> Result<DenseMat> {
        let mut out = DMatrix::zeros(self.n2, x.ncols());
        for j in 0..x.ncols() {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            out.set_column(j, &DVector::from_vec(self.j4_lu.solve(&col)?));
        }
        Ok(out)
    }

    /// `J4⁻ᵀ X` column by column.
    pub fn j4_solve_transpose_dense(&self, x: &DenseMat) -> Result<DenseMat> {
        let mut out = DMatrix::zeros(self.n2, x.ncols());
        for j in 0..x.ncols() {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            out.set_column(j, &DVector::from_vec(self.j4_lu.solve_transpose(&col)?));
        }
        Ok(out)
    }

    /// `C2 J4⁻¹ B2`, the algebraic contribution to the feedthrough.
    pub fn algebraic_feedthrough(&self) -> Result<DenseMat> {
        let j4b2 = self.j4_solve_dense(&self.blocks.b2.to_dense())?;
        Ok(self.blocks.c2.mul_dense(&j4b2))
    }

    /// `𝒟 = D − C2 J4⁻¹ B2`.
    pub fn schur_feedthrough(&self) -> Result<DenseMat> {
        Ok(&self.blocks.d - self.algebraic_feedthrough()?)
    }

    /// Algebraic variables consistent with `x1` and input `u`:
    /// `x2 = J4⁻¹(−J3 x1 − B2 u)`.
    pub fn reconstruct_x2(&self, x1: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if x1.len() != self.n1 || u.len() != self.p {
            return Err(Error::dims("reconstruct_x2: state or input length"));
        }
        let a = self.blocks.j3.mul_vec(x1);
        let b = self.blocks.b2.mul_vec(u);
        let rhs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| -x - y).collect();
        self.j4_lu.solve(&rhs)
    }
}

/// Dense Schur-complemented form `(ℰ, 𝒜, ℬ, 𝒞, 𝒟)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseGeneralized {
    pub e: DenseMat,
    pub a: DenseMat,
    pub b: DenseMat,
    pub c: DenseMat,
    pub dm: DenseMat,
}

impl DenseGeneralized {
    /// `𝒞(sℰ − 𝒜)⁻¹ℬ + 𝒟` by dense LU.
    pub fn transfer(&self, s: Complex64) -> Result<CDenseMat> {
        let pencil = to_complex(&self.e) * s - to_complex(&self.a);
        let lu = pencil.lu();
        let x = lu
            .solve(&to_complex(&self.b))
            .ok_or(Error::SingularAtShift { s })?;
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SingularAtShift { s });
        }
        Ok(to_complex(&self.c) * x + to_complex(&self.dm))
    }

    /// The same system under state feedback `u = −K x + v`, output matrix unchanged.
    pub fn with_feedback(&self, k: &DenseMat) -> DenseGeneralized {
        DenseGeneralized {
            a: &self.a - &self.b * k,
            ..self.clone()
        }
    }

    /// `ℰ⁻¹ 𝒜`.
    pub fn standard_a(&self) -> Result<DenseMat> {
        Ok(dense_inverse(&self.e)? * &self.a)
    }
}

fn cap_check(sys: &Index1System, cap: usize) -> Result<()> {
    if sys.order() > cap {
        return Err(Error::OracleCapExceeded {
            order: sys.order(),
            cap,
        });
    }
    Ok(())
}

/// Dense Schur complements with the cap from [`oracle_cap`].
pub fn schur_reduce_dense(sys: &Index1System) -> Result<DenseGeneralized> {
    schur_reduce_dense_with_cap(sys, oracle_cap())
}

pub fn schur_reduce_dense_with_cap(sys: &Index1System, cap: usize) -> Result<DenseGeneralized> {
    cap_check(sys, cap)?;
    let b = sys.blocks();
    let j4j3 = sys.j4_solve_dense(&b.j3.to_dense())?;
    let j4b2 = sys.j4_solve_dense(&b.b2.to_dense())?;
    Ok(DenseGeneralized {
        e: b.e1.to_dense(),
        a: b.j1.to_dense() - b.j2.mul_dense(&j4j3),
        b: b.b1.to_dense() - b.j2.mul_dense(&j4b2),
        c: b.c1.to_dense() - b.c2.mul_dense(&j4j3),
        dm: &b.d - b.c2.mul_dense(&j4b2),
    })
}

/// Which of the two shifted systems to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `M(α) [v; Γ₁] = [B1; B2] b`
    Right,
    /// `M(α)ᵀ [w; Γ₂] = [C1ᵀ; C2ᵀ] c`
    Left,
}

#[derive(Clone, Copy, Debug)]
pub struct ShiftedSolveRequest<'a> {
    pub shift: Complex64,
    pub side: Side,
    /// Length `p` for [`Side::Right`], `m` for [`Side::Left`].
    pub tangent: &'a [Complex64],
    /// Optional feedback `K0` (`p × n1`).
    pub k0: Option<&'a DenseMat>,
}

/// LU factors of the shifted block matrix
///
/// ```text
/// M(α) = [αE1 − (J1 − B1K0)   −J2]
///        [   −(J3 − B2K0)     −J4]
/// ```
///
/// With feedback present the matrix is bordered by `z = K0 x1` instead of
/// forming the dense products `B1K0` and `B2K0`, which keeps the factors sparse.
pub struct ShiftedSystem<'s> {
    sys: &'s Index1System,
    shift: Complex64,
    lu: LuFactor<Complex64>,
    bordered: bool,
}

/// Treats an all-zero feedback exactly like an absent one.
pub(crate) fn normalize_feedback(k0: Option<&DenseMat>) -> Option<&DenseMat> {
    k0.filter(|k| k.iter().any(|v| *v != 0.0))
}

impl<'s> ShiftedSystem<'s> {
    pub fn new(sys: &'s Index1System, shift: Complex64, k0: Option<&DenseMat>) -> Result<Self> {
        if !shift.re.is_finite() || !shift.im.is_finite() {
            return Err(Error::SingularAtShift { s: shift });
        }
        let k0 = normalize_feedback(k0);
        if let Some(k) = k0 {
            if k.shape() != (sys.p(), sys.n1()) {
                return Err(Error::dims(format!(
                    "feedback is {:?}, expected {}x{}",
                    k.shape(),
                    sys.p(),
                    sys.n1()
                )));
            }
        }
        let b = sys.blocks();
        let (n1, n2, p) = (sys.n1(), sys.n2(), sys.p());
        let cplx = |m: &SparseMat, scale: f64| m.map(|v| Complex64::new(scale * v, 0.0));
        let m11 = b
            .e1
            .map(|v| shift * v)
            .add_scaled(Complex64::new(1.0, 0.0), &cplx(&b.j1, 1.0), Complex64::new(-1.0, 0.0))?;
        let m12 = cplx(&b.j2, -1.0);
        let m21 = cplx(&b.j3, -1.0);
        let m22 = cplx(&b.j4, -1.0);
        let matrix = match k0 {
            None => SparseMat::from_blocks(
                &[n1, n2],
                &[n1, n2],
                &[vec![Some(&m11), Some(&m12)], vec![Some(&m21), Some(&m22)]],
            )?,
            Some(k) => {
                let kk = SparseMat::from_dense(&to_complex(k), 0.0);
                let b1 = cplx(&b.b1, 1.0);
                let b2 = cplx(&b.b2, 1.0);
                let neg_i = SparseMat::identity(p).map(|v: Complex64| -v);
                SparseMat::from_blocks(
                    &[n1, n2, p],
                    &[n1, n2, p],
                    &[
                        vec![Some(&m11), Some(&m12), Some(&b1)],
                        vec![Some(&m21), Some(&m22), Some(&b2)],
                        vec![Some(&kk), None, Some(&neg_i)],
                    ],
                )?
            }
        };
        let lu = sparse_lu(&matrix).map_err(|e| match e {
            Error::SingularMatrix { .. } => Error::SingularAtShift { s: shift },
            other => other,
        })?;
        Ok(Self {
            sys,
            shift,
            lu,
            bordered: k0.is_some(),
        })
    }

    pub fn shift(&self) -> Complex64 {
        self.shift
    }

    fn dim(&self) -> usize {
        self.sys.order() + if self.bordered { self.sys.p() } else { 0 }
    }

    fn check_finite(&self, x: &[Complex64]) -> Result<()> {
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SingularAtShift { s: self.shift });
        }
        Ok(())
    }

    /// Solves with a full right-hand side `[r1; r2]` of length `n1 + n2`
    /// and returns `[x1; x2]`.
    pub fn solve_full(&self, side: Side, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.sys.order();
        if rhs.len() != n {
            return Err(Error::dims(format!(
                "block right-hand side has length {}, expected {n}",
                rhs.len()
            )));
        }
        let mut full = rhs.to_vec();
        full.resize(self.dim(), Complex64::new(0.0, 0.0));
        let mut x = match side {
            Side::Right => self.lu.solve(&full)?,
            Side::Left => self.lu.solve_transpose(&full)?,
        };
        self.check_finite(&x)?;
        x.truncate(n);
        Ok(x)
    }

    /// Full `[x1; x2]` solution for a tangent direction.
    pub fn solve_tangent_full(&self, side: Side, tangent: &[Complex64]) -> Result<Vec<Complex64>> {
        let b = self.sys.blocks();
        let rhs = match side {
            Side::Right => {
                if tangent.len() != self.sys.p() {
                    return Err(Error::dims(format!(
                        "right tangent has length {}, expected p = {}",
                        tangent.len(),
                        self.sys.p()
                    )));
                }
                let mut r = b.b1.mul_vec(tangent);
                r.extend(b.b2.mul_vec(tangent));
                r
            }
            Side::Left => {
                if tangent.len() != self.sys.m() {
                    return Err(Error::dims(format!(
                        "left tangent has length {}, expected m = {}",
                        tangent.len(),
                        self.sys.m()
                    )));
                }
                let mut r = b.c1.tr_mul_vec(tangent);
                r.extend(b.c2.tr_mul_vec(tangent));
                r
            }
        };
        self.solve_full(side, &rhs)
    }

    /// The `x1` block of the tangent solve.
    pub fn solve_tangent(&self, side: Side, tangent: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut x = self.solve_tangent_full(side, tangent)?;
        x.truncate(self.sys.n1());
        Ok(x)
    }

    /// `[C1 C2] X + D` for the full block solution of every input column.
    pub fn transfer(&self) -> Result<CDenseMat> {
        let (n1, p, m) = (self.sys.n1(), self.sys.p(), self.sys.m());
        let b = self.sys.blocks();
        let mut g = to_complex(&b.d);
        for j in 0..p {
            let mut e = vec![Complex64::new(0.0, 0.0); p];
            e[j] = Complex64::new(1.0, 0.0);
            let x = self.solve_tangent_full(Side::Right, &e)?;
            let y1 = b.c1.mul_vec(&x[..n1]);
            let y2 = b.c2.mul_vec(&x[n1..]);
            for i in 0..m {
                g[(i, j)] += y1[i] + y2[i];
            }
        }
        Ok(g)
    }
}

/// `G(s)` by one sparse block solve per input column; the Schur complement is never formed.
pub fn transfer_eval(sys: &Index1System, s: Complex64) -> Result<CDenseMat> {
    ShiftedSystem::new(sys, s, None)?.transfer()
}

/// Transfer function of the block system with `K0` substituted into `J1` and `J3`.
pub fn transfer_eval_feedback(
    sys: &Index1System,
    s: Complex64,
    k0: Option<&DenseMat>,
) -> Result<CDenseMat> {
    ShiftedSystem::new(sys, s, k0)?.transfer()
}

/// The `x1` block `v` (right) or `w` (left) of one shifted block solve.
pub fn shifted_block_solve(sys: &Index1System, req: &ShiftedSolveRequest<'_>) -> Result<Vec<Complex64>> {
    ShiftedSystem::new(sys, req.shift, req.k0)?.solve_tangent(req.side, req.tangent)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::c64;

    pub(crate) fn scalar_blocks() -> SystemBlocks {
        let one = |v: f64| SparseMat::from_triplets(1, 1, &[(0, 0, v)]).unwrap();
        SystemBlocks {
            e1: one(1.0),
            j1: one(-2.0),
            j2: one(1.0),
            j3: one(1.0),
            j4: one(1.0),
            b1: one(1.0),
            b2: SparseMat::zeros(1, 1),
            c1: one(1.0),
            c2: SparseMat::zeros(1, 1),
            d: DMatrix::zeros(1, 1),
        }
    }

    pub(crate) fn scalar_system() -> Index1System {
        Index1System::new(scalar_blocks()).unwrap()
    }

    #[test]
    fn scalar_schur_complement() {
        let g = schur_reduce_dense(&scalar_system()).unwrap();
        assert_eq!(g.a[(0, 0)], -3.0);
        assert_eq!(g.b[(0, 0)], 1.0);
        assert_eq!(g.c[(0, 0)], 1.0);
        assert_eq!(g.dm[(0, 0)], 0.0);
        assert_eq!(g.e[(0, 0)], 1.0);
    }

    #[test]
    fn singular_j4_and_e1_rejected() {
        let mut b = scalar_blocks();
        b.j4 = SparseMat::zeros(1, 1);
        assert!(matches!(Index1System::new(b), Err(Error::SingularJ4 { column: 0 })));
        let mut b = scalar_blocks();
        b.e1 = SparseMat::zeros(1, 1);
        assert!(matches!(Index1System::new(b), Err(Error::SingularE1 { .. })));
        let mut b = scalar_blocks();
        b.c1 = SparseMat::zeros(2, 1);
        assert!(matches!(Index1System::new(b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn scalar_transfer_values() {
        let sys = scalar_system();
        let g0 = transfer_eval(&sys, c64(0.0, 0.0)).unwrap();
        assert!((g0[(0, 0)] - c64(1.0 / 3.0, 0.0)).norm() < 1e-15);
        let ginf = transfer_eval(&sys, c64(0.0, 1e9)).unwrap();
        assert!(ginf[(0, 0)].norm() < 1e-8);
    }

    #[test]
    fn scalar_shifted_solves() {
        let sys = scalar_system();
        let one = [c64(1.0, 0.0)];
        let req = ShiftedSolveRequest {
            shift: c64(1.0, 0.0),
            side: Side::Right,
            tangent: &one,
            k0: None,
        };
        let v = shifted_block_solve(&sys, &req).unwrap();
        assert!((v[0] - c64(0.25, 0.0)).norm() < 1e-15);
        let k = DMatrix::from_element(1, 1, 1.0);
        let v = shifted_block_solve(&sys, &ShiftedSolveRequest { k0: Some(&k), ..req }).unwrap();
        assert!((v[0] - c64(0.2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_shift_reported() {
        // 𝒜 = −3, so α = −3 makes the pencil singular.
        let sys = scalar_system();
        let one = [c64(1.0, 0.0)];
        let req = ShiftedSolveRequest {
            shift: c64(-3.0, 0.0),
            side: Side::Right,
            tangent: &one,
            k0: None,
        };
        match shifted_block_solve(&sys, &req) {
            Err(Error::SingularAtShift { s }) => assert_eq!(s, c64(-3.0, 0.0)),
            other => panic!("expected SingularAtShift, got {other:?}"),
        }
    }

    #[test]
    fn cap_is_enforced() {
        let sys = scalar_system();
        assert!(matches!(
            schur_reduce_dense_with_cap(&sys, 1),
            Err(Error::OracleCapExceeded { order: 2, cap: 1 })
        ));
    }

    #[test]
    fn x2_reconstruction() {
        let sys = scalar_system();
        // x2 = J4⁻¹(−J3 x1 − B2 u) = −x1
        assert_eq!(sys.reconstruct_x2(&[2.0], &[5.0]).unwrap(), vec![-2.0]);
    }

    use crate::descriptor::gen_synthetic;

    /// Dense block elimination with an explicit `J4` inverse; independent of the sparse path.
    fn block_oracle(sys: &Index1System) -> DenseGeneralized {
        let b = sys.blocks();
        let j4i = b.j4.to_dense().try_inverse().unwrap();
        let j2 = b.j2.to_dense();
        let c2 = b.c2.to_dense();
        DenseGeneralized {
            e: b.e1.to_dense(),
            a: b.j1.to_dense() - &j2 * &j4i * b.j3.to_dense(),
            b: b.b1.to_dense() - &j2 * &j4i * b.b2.to_dense(),
            c: b.c1.to_dense() - &c2 * &j4i * b.j3.to_dense(),
            dm: &b.d - &c2 * &j4i * b.b2.to_dense(),
        }
    }

    fn max_diff(a: &DenseMat, b: &DenseMat) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn schur_matches_block_oracle() {
        let sys = gen_synthetic(6, 5, 2, 2, 1, 42).unwrap();
        let g = schur_reduce_dense(&sys).unwrap();
        let o = block_oracle(&sys);
        assert!(max_diff(&g.a, &o.a) <= 1e-12);
        assert!(max_diff(&g.b, &o.b) <= 1e-12);
        assert!(max_diff(&g.c, &o.c) <= 1e-12);
        assert!(max_diff(&g.dm, &o.dm) <= 1e-12);
    }

    #[test]
    fn decoupled_blocks_pass_through() {
        let mut b = scalar_blocks();
        b.j2 = SparseMat::zeros(1, 1);
        let sys = Index1System::new(b.clone()).unwrap();
        let g = schur_reduce_dense(&sys).unwrap();
        assert_eq!(g.a, b.j1.to_dense());
        assert_eq!(g.b, b.b1.to_dense());
        assert_eq!(g.c, b.c1.to_dense());
        assert_eq!(g.dm, b.d);
    }

    #[test]
    fn transfer_matches_dense_schur() {
        let sys = gen_synthetic(10, 8, 2, 3, 1, 5).unwrap();
        let g = schur_reduce_dense(&sys).unwrap();
        for k in 0..20 {
            let s = c64(0.1 * k as f64 - 0.7, 10f64.powf(-2.0 + 0.25 * k as f64));
            let x = transfer_eval(&sys, s).unwrap();
            let y = g.transfer(s).unwrap();
            for (a, b) in x.iter().zip(y.iter()) {
                assert!((a - b).norm() <= 1e-10 * b.norm().max(1e-300), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn shifted_solves_match_dense_with_feedback() {
        let sys = gen_synthetic(9, 7, 2, 2, 2, 11).unwrap();
        let g = schur_reduce_dense(&sys).unwrap();
        let k0 = DMatrix::from_fn(2, 9, |i, j| 0.1 * (i as f64 + 1.0) * ((j as f64).sin()));
        let alpha = c64(0.8, 1.3);
        let bt = [c64(0.6, 0.0), c64(0.0, 0.8)];
        let af = &g.a - &g.b * &k0;
        let pencil = to_complex(&g.e) * alpha - to_complex(&af);
        let v = shifted_block_solve(
            &sys,
            &ShiftedSolveRequest { shift: alpha, side: Side::Right, tangent: &bt, k0: Some(&k0) },
        )
        .unwrap();
        let v_ref = pencil.clone().lu().solve(&(to_complex(&g.b) * DVector::from_row_slice(&bt))).unwrap();
        assert!((DVector::from_vec(v) - &v_ref).norm() <= 1e-10 * v_ref.norm());

        // The block form carries C_f = C1 - C2 J4⁻¹ (J3 - B2 K0) on the left.
        let cf = &g.c + (sys.algebraic_feedthrough().unwrap() * &k0);
        let w = shifted_block_solve(
            &sys,
            &ShiftedSolveRequest { shift: alpha, side: Side::Left, tangent: &bt, k0: Some(&k0) },
        )
        .unwrap();
        let w_ref = pencil
            .transpose()
            .lu()
            .solve(&(to_complex(&cf.transpose()) * DVector::from_row_slice(&bt)))
            .unwrap();
        assert!((DVector::from_vec(w) - &w_ref).norm() <= 1e-10 * w_ref.norm());
    }

    #[test]
    fn left_solve_matches_schur_output_when_b2_vanishes() {
        let mut blocks = gen_synthetic(8, 6, 2, 2, 1, 13).unwrap().into_blocks();
        blocks.b2 = SparseMat::zeros(6, 2);
        let sys = Index1System::new(blocks).unwrap();
        let g = schur_reduce_dense(&sys).unwrap();
        let k0 = DMatrix::from_fn(2, 8, |i, j| 0.2 * (i as f64 - j as f64).cos());
        let alpha = c64(2.0, 0.0);
        let ct = [c64(1.0, 0.0), c64(-1.0, 0.0)];
        let af = &g.a - &g.b * &k0;
        let w = shifted_block_solve(
            &sys,
            &ShiftedSolveRequest { shift: alpha, side: Side::Left, tangent: &ct, k0: Some(&k0) },
        )
        .unwrap();
        let lhs = (to_complex(&g.e) * alpha - to_complex(&af)).transpose();
        let w_ref = lhs.lu().solve(&(to_complex(&g.c.transpose()) * DVector::from_row_slice(&ct))).unwrap();
        assert!((DVector::from_vec(w) - &w_ref).norm() <= 1e-10 * w_ref.norm());
    }

    #[test]
    fn zero_feedback_is_absent_feedback() {
        let sys = gen_synthetic(7, 4, 2, 1, 1, 3).unwrap();
        let zero = DMatrix::zeros(2, 7);
        let bt = [c64(1.0, 0.0), c64(0.5, -0.5)];
        for side in [Side::Right, Side::Left] {
            let t: &[Complex64] = if side == Side::Right { &bt } else { &bt[..1] };
            let req = ShiftedSolveRequest { shift: c64(0.5, 2.0), side, tangent: t, k0: None };
            let a = shifted_block_solve(&sys, &req).unwrap();
            let b = shifted_block_solve(&sys, &ShiftedSolveRequest { k0: Some(&zero), ..req }).unwrap();
            assert_eq!(a, b);
        }
    }
}
