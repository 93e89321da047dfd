//! Tangential IRKA for index-1 descriptor systems.
//!
//! Projection bases come from sparse shifted block solves of the full
//! `(n1 + n2)` system, and the reduced matrices are assembled from the
//! original blocks through the cached `J4` factorization, so neither the
//! Schur complement nor `J4⁻¹` is ever formed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::descriptor::{normalize_feedback, Index1System, ShiftedSystem, Side};
use crate::error::{Error, Result};
use crate::linalg::{c64, cmp_re_im, eig_pencil_dense, qr_orth, CDenseMat, DenseMat};

pub const DEFAULT_TOL: f64 = 1e-5;
pub const DEFAULT_IMAX: usize = 150;

/// Interpolation points with right (`p × r`) and left (`m × r`) tangent directions.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSet {
    pub alphas: Vec<Complex64>,
    pub right_tangents: CDenseMat,
    pub left_tangents: CDenseMat,
}

impl ShiftSet {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn right(&self, i: usize) -> Vec<Complex64> {
        self.right_tangents.column(i).iter().copied().collect()
    }

    pub fn left(&self, i: usize) -> Vec<Complex64> {
        self.left_tangents.column(i).iter().copied().collect()
    }

    /// Index of the conjugate partner of every shift with nonzero imaginary part.
    fn partners(&self) -> Result<Vec<Option<usize>>> {
        let n = self.len();
        let mut partner = vec![None; n];
        for i in 0..n {
            let a = self.alphas[i];
            if a.im <= 0.0 || partner[i].is_some() {
                continue;
            }
            let j = (0..n)
                .filter(|&j| partner[j].is_none() && self.alphas[j].im < 0.0)
                .min_by(|&x, &y| {
                    (self.alphas[x] - a.conj())
                        .norm()
                        .total_cmp(&(self.alphas[y] - a.conj()).norm())
                })
                .filter(|&j| (self.alphas[j] - a.conj()).norm() <= 1e-10 * a.norm().max(1.0))
                .ok_or_else(|| Error::InvalidShifts(format!("shift {a} has no conjugate partner")))?;
            partner[i] = Some(j);
            partner[j] = Some(i);
        }
        if let Some(i) = (0..n).find(|&i| self.alphas[i].im < 0.0 && partner[i].is_none()) {
            return Err(Error::InvalidShifts(format!(
                "shift {} has no conjugate partner",
                self.alphas[i]
            )));
        }
        Ok(partner)
    }

    /// Checks tangent shapes, conjugation closure, and the right half-plane.
    pub fn validate(&self, p: usize, m: usize) -> Result<()> {
        let r = self.len();
        if self.right_tangents.shape() != (p, r) || self.left_tangents.shape() != (m, r) {
            return Err(Error::InvalidShifts(format!(
                "tangents are {:?} and {:?} for {r} shifts with p={p}, m={m}",
                self.right_tangents.shape(),
                self.left_tangents.shape()
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.re > 0.0) || !a.im.is_finite()) {
            return Err(Error::InvalidShifts(format!("shift {a} is not in the open right half-plane")));
        }
        self.partners().map(|_| ())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftStrategy {
    /// Real shifts geometrically spaced in `[0.1, 1000]`.
    LogSpaced,
    /// Seeded conjugation-closed shifts with log-uniform real parts in `[0.1, 1000]`.
    RandomStable,
}

fn unit_tangents(rows: usize, r: usize) -> CDenseMat {
    DMatrix::from_fn(rows, r, |i, j| if i == j % rows { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
}

pub fn init_shifts(r: usize, p: usize, m: usize, strategy: ShiftStrategy, seed: u64) -> ShiftSet {
    let alphas = match strategy {
        ShiftStrategy::LogSpaced => {
            if r == 1 {
                vec![c64(10.0, 0.0)]
            } else {
                (0..r)
                    .map(|i| c64(0.1 * 1e4f64.powf(i as f64 / (r - 1) as f64), 0.0))
                    .collect()
            }
        }
        ShiftStrategy::RandomStable => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(r);
            while out.len() < r {
                let re = 10f64.powf(rng.random_range(-1.0..=3.0));
                if r - out.len() >= 2 {
                    let im = re * rng.random_range(0.1..1.0);
                    out.push(c64(re, im));
                    out.push(c64(re, -im));
                } else {
                    out.push(c64(re, 0.0));
                }
            }
            out
        }
    };
    ShiftSet {
        alphas,
        right_tangents: unit_tangents(p, r),
        left_tangents: unit_tangents(m, r),
    }
}

/// Real orthonormal projection bases.
#[derive(Clone, Debug)]
pub struct Projectors {
    pub v: DenseMat,
    pub w: DenseMat,
    /// The shifts the bases were built from, after any singularity perturbation.
    pub shifts: ShiftSet,
    /// Columns lost to rank deficiency (including truncation to equal size).
    pub dropped: usize,
}

impl Projectors {
    pub fn rank(&self) -> usize {
        self.v.ncols()
    }
}

fn perturbed(alpha: Complex64) -> Complex64 {
    alpha + 1e-6 * (1.0 + alpha.norm())
}

/// Factors the shifted system, retrying once with a perturbed shift.
fn factor_with_retry<'s>(
    sys: &'s Index1System,
    alpha: Complex64,
    k0: Option<&DenseMat>,
) -> Result<ShiftedSystem<'s>> {
    match ShiftedSystem::new(sys, alpha, k0) {
        Err(Error::SingularAtShift { .. }) => ShiftedSystem::new(sys, perturbed(alpha), k0),
        other => other,
    }
}

struct ShiftColumns {
    alpha: Complex64,
    v: Vec<Complex64>,
    w: Vec<Complex64>,
}

pub fn build_projectors(sys: &Index1System, k0: Option<&DenseMat>, shifts: &ShiftSet) -> Result<Projectors> {
    shifts.validate(sys.p(), sys.m())?;
    let k0 = normalize_feedback(k0);
    let partner = shifts.partners()?;
    let reps: Vec<usize> = (0..shifts.len()).filter(|&i| shifts.alphas[i].im >= 0.0).collect();
    let solved: Vec<Result<ShiftColumns>> = reps
        .par_iter()
        .map(|&i| {
            let f = factor_with_retry(sys, shifts.alphas[i], k0)?;
            let solve = |side, t: Vec<Complex64>| -> Result<Vec<Complex64>> {
                match f.solve_tangent(side, &t) {
                    Err(Error::SingularAtShift { .. }) if f.shift() == shifts.alphas[i] => {
                        factor_with_retry(sys, perturbed(shifts.alphas[i]), k0)?.solve_tangent(side, &t)
                    }
                    other => other,
                }
            };
            Ok(ShiftColumns {
                alpha: f.shift(),
                v: solve(Side::Right, shifts.right(i))?,
                w: solve(Side::Left, shifts.left(i))?,
            })
        })
        .collect();

    let n1 = sys.n1();
    let mut vcols: Vec<DVector<f64>> = Vec::with_capacity(shifts.len());
    let mut wcols: Vec<DVector<f64>> = Vec::with_capacity(shifts.len());
    let mut used = shifts.clone();
    for (&i, res) in reps.iter().zip(solved) {
        let sc = res?;
        let re = |x: &[Complex64]| DVector::from_iterator(n1, x.iter().map(|z| z.re));
        let im = |x: &[Complex64]| DVector::from_iterator(n1, x.iter().map(|z| z.im));
        vcols.push(re(&sc.v));
        wcols.push(re(&sc.w));
        used.alphas[i] = sc.alpha;
        if let Some(j) = partner[i] {
            vcols.push(im(&sc.v));
            wcols.push(im(&sc.w));
            used.alphas[j] = sc.alpha.conj();
        } else {
            used.alphas[i].im = 0.0;
        }
    }
    let v = qr_orth(&DMatrix::from_columns(&vcols))?;
    let w = qr_orth(&DMatrix::from_columns(&wcols))?;
    let k = v.rank().min(w.rank());
    if k == 0 {
        return Err(Error::ConvergenceFailure("projection bases are empty".into()));
    }
    Ok(Projectors {
        v: v.q.columns(0, k).clone_owned(),
        w: w.q.columns(0, k).clone_owned(),
        shifts: used,
        dropped: shifts.len() - k,
    })
}

/// Dense reduced model `Ê ẋ = Â x + B̂ u`, `y = Ĉ x + D̂ u`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    pub e: DenseMat,
    pub a: DenseMat,
    pub b: DenseMat,
    pub c: DenseMat,
    pub d: DenseMat,
}

impl ReducedModel {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `Ĉ(sÊ − Â)⁻¹B̂ + D̂`.
    pub fn transfer(&self, s: Complex64) -> Result<CDenseMat> {
        let cx = |m: &DenseMat| m.map(|v| c64(v, 0.0));
        let pencil = cx(&self.e) * s - cx(&self.a);
        let x = pencil
            .lu()
            .solve(&cx(&self.b))
            .filter(|x| x.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            .ok_or(Error::SingularAtShift { s })?;
        Ok(cx(&self.c) * x + cx(&self.d))
    }
}

/// Which feedthrough the reduced model carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Feedthrough {
    /// `D − C2 J4⁻¹ B2`, the feedthrough of the Schur-complemented system.
    #[default]
    Schur,
    /// The block `D` as stored.
    Verbatim,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RomOptions {
    pub feedthrough: Feedthrough,
    /// Assemble the reduced model of the feedback-shifted system
    /// (`Â − B̂ K0 V`) instead of the original one.
    pub project_shifted: bool,
}

pub fn assemble_rom(sys: &Index1System, proj: &Projectors) -> Result<ReducedModel> {
    assemble_rom_with(sys, proj, None, &RomOptions::default())
}

pub fn assemble_rom_with(
    sys: &Index1System,
    proj: &Projectors,
    k0: Option<&DenseMat>,
    opts: &RomOptions,
) -> Result<ReducedModel> {
    let (v, w) = (&proj.v, &proj.w);
    if v.nrows() != sys.n1() || w.shape() != v.shape() || v.ncols() == 0 {
        return Err(Error::dims(format!(
            "projectors {:?} and {:?} for n1 = {}",
            v.shape(),
            w.shape(),
            sys.n1()
        )));
    }
    let b = sys.blocks();
    let wt = w.transpose();
    let j3v = b.j3.mul_dense(v);
    let j4_j3v = sys.j4_solve_dense(&j3v)?;
    let j4_b2 = sys.j4_solve_dense(&b.b2.to_dense())?;
    let e = &wt * b.e1.mul_dense(v);
    let mut a = &wt * (b.j1.mul_dense(v) - b.j2.mul_dense(&j4_j3v));
    let bh = &wt * (b.b1.to_dense() - b.j2.mul_dense(&j4_b2));
    let mut c = b.c1.mul_dense(v) - b.c2.mul_dense(&j4_j3v);
    let algebraic = b.c2.mul_dense(&j4_b2);
    let d = match opts.feedthrough {
        Feedthrough::Schur => &b.d - &algebraic,
        Feedthrough::Verbatim => b.d.clone(),
    };
    if opts.project_shifted {
        if let Some(k) = normalize_feedback(k0) {
            let kv = k * v;
            a -= &bh * &kv;
            c += &algebraic * &kv;
        }
    }
    Ok(ReducedModel { e, a, b: bh, c, d })
}

/// `αᵢ = −λᵢ(Â, Ê)` reflected into the right half-plane, with tangents from
/// the reduced residues `(Ĉzᵢ)(yᵢᴴB̂)`, normalized to unit length.
pub fn update_shifts(rom: &ReducedModel) -> Result<ShiftSet> {
    let eig = eig_pencil_dense(&rom.a, &rom.e)?;
    let r = eig.eigenvalues.len();
    let bh = rom.b.map(|v| c64(v, 0.0));
    let ch = rom.c.map(|v| c64(v, 0.0));
    let mut alphas = Vec::with_capacity(r);
    let mut bt = DMatrix::zeros(rom.b.ncols(), r);
    let mut ct = DMatrix::zeros(rom.c.nrows(), r);
    for i in 0..r {
        let lam = eig.eigenvalues[i];
        let mut alpha = -lam;
        if alpha.re <= 0.0 {
            alpha.re = alpha.re.abs().max(1e-8 * alpha.norm().max(1.0));
        }
        alphas.push(alpha);
        let y = eig.left.column(i).map(|z| z.conj());
        let b = bh.transpose() * y;
        let c = &ch * eig.right.column(i);
        bt.set_column(i, &normalize_tangent(b, lam.im == 0.0));
        ct.set_column(i, &normalize_tangent(c, lam.im == 0.0));
    }
    Ok(ShiftSet {
        alphas,
        right_tangents: bt,
        left_tangents: ct,
    })
}

fn normalize_tangent(mut t: DVector<Complex64>, real: bool) -> DVector<Complex64> {
    let nrm = t.norm();
    if !(nrm > 0.0) || !nrm.is_finite() {
        // A residue direction that vanishes carries no information; fall back to e1.
        let mut e = DVector::zeros(t.len());
        e[0] = c64(1.0, 0.0);
        return e;
    }
    t /= c64(nrm, 0.0);
    if real {
        let big = t.iter().copied().fold(c64(0.0, 0.0), |a, b| if b.norm() > a.norm() { b } else { a });
        let rot = big.conj() / big.norm();
        t = t.map(|z| c64((z * rot).re, 0.0));
        let n2 = t.norm();
        t /= c64(n2, 0.0);
    }
    t
}

/// Max relative change between shift sets compared in `(Re, Im)` order.
pub fn shift_change(old: &[Complex64], new: &[Complex64]) -> f64 {
    if old.len() != new.len() {
        return f64::INFINITY;
    }
    let mut a = old.to_vec();
    let mut b = new.to_vec();
    a.sort_by(cmp_re_im);
    b.sort_by(cmp_re_im);
    a.iter()
        .zip(&b)
        .map(|(x, y)| (y - x).norm() / x.norm())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct IrkaOptions {
    pub r: usize,
    pub tol: f64,
    pub imax: usize,
    pub strategy: ShiftStrategy,
    pub seed: u64,
    pub rom: RomOptions,
}

impl IrkaOptions {
    pub fn new(r: usize) -> Self {
        Self {
            r,
            tol: DEFAULT_TOL,
            imax: DEFAULT_IMAX,
            strategy: ShiftStrategy::LogSpaced,
            seed: 0,
            rom: RomOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IrkaReport {
    pub iterations: usize,
    pub converged: bool,
    /// `shift_change` at every iteration, the quantity compared against `tol`.
    pub shift_history: Vec<f64>,
    /// Shifts of the final projectors.
    pub final_shifts: ShiftSet,
    pub tol: f64,
    pub imax: usize,
    pub order: usize,
}

pub fn irka_run(
    sys: &Index1System,
    k0: Option<&DenseMat>,
    r: usize,
    tol: f64,
    imax: usize,
) -> Result<(ReducedModel, Projectors, IrkaReport)> {
    irka_run_with(sys, k0, &IrkaOptions { tol, imax, ..IrkaOptions::new(r) })
}

pub fn irka_run_with(
    sys: &Index1System,
    k0: Option<&DenseMat>,
    opts: &IrkaOptions,
) -> Result<(ReducedModel, Projectors, IrkaReport)> {
    if opts.r == 0 || opts.r > sys.n1() {
        return Err(Error::dims(format!("reduced order {} outside 1..={}", opts.r, sys.n1())));
    }
    let k0 = normalize_feedback(k0);
    let shifts = init_shifts(opts.r, sys.p(), sys.m(), opts.strategy, opts.seed);
    let mut proj = build_projectors(sys, k0, &shifts)?;
    let mut history = Vec::new();
    let mut converged = false;
    while history.len() < opts.imax {
        let rom = assemble_rom_with(sys, &proj, k0, &opts.rom)?;
        let next = update_shifts(&rom)?;
        let change = shift_change(&proj.shifts.alphas, &next.alphas);
        history.push(change);
        proj = build_projectors(sys, k0, &next)?;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let rom = assemble_rom_with(sys, &proj, k0, &opts.rom)?;
    let report = IrkaReport {
        iterations: history.len(),
        converged,
        shift_history: history,
        final_shifts: proj.shifts.clone(),
        tol: opts.tol,
        imax: opts.imax,
        order: proj.rank(),
    };
    Ok((rom, proj, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{gen_synthetic, schur_reduce_dense, SystemBlocks};
    use crate::linalg::{eigenvalues_dense, orthonormality_error, SparseMat};

    fn scalar_system() -> Index1System {
        let one = |v: f64| SparseMat::from_triplets(1, 1, &[(0, 0, v)]).unwrap();
        Index1System::new(SystemBlocks {
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
        })
        .unwrap()
    }

    #[test]
    fn log_spaced_endpoints() {
        let s = init_shifts(2, 1, 1, ShiftStrategy::LogSpaced, 0);
        assert!((s.alphas[0].re - 0.1).abs() < 1e-15);
        assert!((s.alphas[1].re - 1000.0).abs() < 1e-9);
        let s = init_shifts(1, 1, 1, ShiftStrategy::LogSpaced, 0);
        assert_eq!(s.right_tangents[(0, 0)], c64(1.0, 0.0));
        assert_eq!(s.left_tangents[(0, 0)], c64(1.0, 0.0));
    }

    #[test]
    fn random_stable_is_closed_and_reproducible() {
        let a = init_shifts(4, 2, 2, ShiftStrategy::RandomStable, 7);
        let b = init_shifts(4, 2, 2, ShiftStrategy::RandomStable, 7);
        assert_eq!(a, b);
        a.validate(2, 2).unwrap();
        let c = init_shifts(5, 2, 2, ShiftStrategy::RandomStable, 7);
        c.validate(2, 2).unwrap();
    }

    #[test]
    fn scalar_projectors_and_rom() {
        let sys = scalar_system();
        let shifts = ShiftSet {
            alphas: vec![c64(1.0, 0.0)],
            right_tangents: unit_tangents(1, 1),
            left_tangents: unit_tangents(1, 1),
        };
        let proj = build_projectors(&sys, None, &shifts).unwrap();
        assert!((proj.v[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((proj.w[(0, 0)].abs() - 1.0).abs() < 1e-15);
        let rom = assemble_rom(&sys, &proj).unwrap();
        assert!((rom.e[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((rom.a[(0, 0)] + 3.0).abs() < 1e-15);
        assert!((rom.b[(0, 0)] * rom.c[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conjugate_pair_gives_two_real_columns() {
        let sys = gen_synthetic(10, 6, 1, 1, 0, 2).unwrap();
        let shifts = ShiftSet {
            alphas: vec![c64(1.0, 2.0), c64(1.0, -2.0)],
            right_tangents: unit_tangents(1, 2),
            left_tangents: unit_tangents(1, 2),
        };
        let proj = build_projectors(&sys, None, &shifts).unwrap();
        assert_eq!(proj.v.ncols(), 2);
        assert!(orthonormality_error(&proj.v) <= 1e-12);
        assert!(orthonormality_error(&proj.w) <= 1e-12);
    }

    #[test]
    fn unclosed_shift_set_rejected() {
        let sys = gen_synthetic(6, 3, 1, 1, 0, 2).unwrap();
        let shifts = ShiftSet {
            alphas: vec![c64(1.0, 2.0)],
            right_tangents: unit_tangents(1, 1),
            left_tangents: unit_tangents(1, 1),
        };
        assert!(matches!(build_projectors(&sys, None, &shifts), Err(Error::InvalidShifts(_))));
        let shifts = ShiftSet { alphas: vec![c64(-1.0, 0.0)], ..shifts };
        assert!(matches!(build_projectors(&sys, None, &shifts), Err(Error::InvalidShifts(_))));
    }

    #[test]
    fn span_contains_dense_krylov_vector() {
        let sys = gen_synthetic(14, 8, 2, 2, 1, 31).unwrap();
        let g = schur_reduce_dense(&sys).unwrap();
        let k0 = DMatrix::from_fn(2, 14, |i, j| 0.05 * ((i + 2 * j) as f64).cos());
        let shifts = init_shifts(4, 2, 2, ShiftStrategy::RandomStable, 3);
        let proj = build_projectors(&sys, Some(&k0), &shifts).unwrap();
        let af = &g.a - &g.b * &k0;
        let cx = |m: &DenseMat| m.map(|v| c64(v, 0.0));
        let x = (cx(&g.e) * shifts.alphas[0] - cx(&af))
            .lu()
            .solve(&(cx(&g.b) * DVector::from_vec(shifts.right(0))))
            .unwrap();
        let vc = cx(&proj.v);
        let resid = &x - &vc * (vc.adjoint() * &x);
        assert!(resid.norm() <= 1e-8 * x.norm());
    }

    #[test]
    fn identity_projection_reproduces_schur() {
        let sys = gen_synthetic(8, 5, 2, 2, 1, 9).unwrap();
        let g = schur_reduce_dense(&sys).unwrap();
        let proj = Projectors {
            v: DMatrix::identity(8, 8),
            w: DMatrix::identity(8, 8),
            shifts: init_shifts(8, 2, 2, ShiftStrategy::LogSpaced, 0),
            dropped: 0,
        };
        let rom = assemble_rom(&sys, &proj).unwrap();
        for (x, y) in [(&rom.e, &g.e), (&rom.a, &g.a), (&rom.b, &g.b), (&rom.c, &g.c), (&rom.d, &g.dm)] {
            assert!((x - y).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn random_projection_matches_dense() {
        let sys = gen_synthetic(12, 7, 2, 2, 0, 4).unwrap();
        let g = schur_reduce_dense(&sys).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rand_orth = || {
            let m = DMatrix::from_fn(12, 4, |_, _| rng.random::<f64>() - 0.5);
            qr_orth(&m).unwrap().q
        };
        let proj = Projectors {
            v: rand_orth(),
            w: rand_orth(),
            shifts: init_shifts(4, 2, 2, ShiftStrategy::LogSpaced, 0),
            dropped: 0,
        };
        let rom = assemble_rom(&sys, &proj).unwrap();
        let wt = proj.w.transpose();
        assert!((&rom.a - &wt * &g.a * &proj.v).abs().max() <= 1e-10);
        assert!((&rom.e - &wt * &g.e * &proj.v).abs().max() <= 1e-10);
        assert!((&rom.b - &wt * &g.b).abs().max() <= 1e-10);
        assert!((&rom.c - &g.c * &proj.v).abs().max() <= 1e-10);
    }

    #[test]
    fn verbatim_feedthrough_keeps_d() {
        let sys = gen_synthetic(8, 5, 2, 2, 0, 12).unwrap();
        let proj = Projectors {
            v: DMatrix::identity(8, 3),
            w: DMatrix::identity(8, 3),
            shifts: init_shifts(3, 2, 2, ShiftStrategy::LogSpaced, 0),
            dropped: 0,
        };
        let opts = RomOptions { feedthrough: Feedthrough::Verbatim, project_shifted: false };
        let rom = assemble_rom_with(&sys, &proj, None, &opts).unwrap();
        assert_eq!(&rom.d, sys.d());
    }

    #[test]
    fn update_shift_examples() {
        let rom = |a: &[f64]| ReducedModel {
            e: DMatrix::identity(2, 2),
            a: DMatrix::from_diagonal(&DVector::from_row_slice(a)),
            b: DMatrix::from_element(2, 1, 1.0),
            c: DMatrix::from_element(1, 2, 1.0),
            d: DMatrix::zeros(1, 1),
        };
        let mut s = update_shifts(&rom(&[-1.0, -2.0])).unwrap().alphas;
        s.sort_by(cmp_re_im);
        assert_eq!(s, vec![c64(1.0, 0.0), c64(2.0, 0.0)]);
        let mut s = update_shifts(&rom(&[1.0, -2.0])).unwrap().alphas;
        s.sort_by(cmp_re_im);
        assert_eq!(s, vec![c64(1.0, 0.0), c64(2.0, 0.0)]);
    }

    #[test]
    fn update_matches_negated_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5) - DMatrix::identity(4, 4) * 2.0;
        let rom = ReducedModel {
            e: DMatrix::identity(4, 4),
            a: a.clone(),
            b: DMatrix::from_fn(4, 2, |_, _| rng.random::<f64>()),
            c: DMatrix::from_fn(2, 4, |_, _| rng.random::<f64>()),
            d: DMatrix::zeros(2, 2),
        };
        let s = update_shifts(&rom).unwrap();
        s.validate(2, 2).unwrap();
        let mut neg: Vec<Complex64> = eigenvalues_dense(&a).unwrap().iter().map(|z| -z).collect();
        let mut got = s.alphas.clone();
        neg.sort_by(cmp_re_im);
        got.sort_by(cmp_re_im);
        for (x, y) in got.iter().zip(&neg) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn full_order_converges_quickly() {
        let sys = gen_synthetic(4, 3, 1, 1, 0, 5).unwrap();
        let (_, proj, rep) = irka_run(&sys, None, 4, 1e-5, 150).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.iterations <= 2);
        assert_eq!(rep.shift_history.len(), rep.iterations);
        assert_eq!(proj.rank(), 4);
    }

    #[test]
    fn rejects_bad_order() {
        let sys = gen_synthetic(4, 3, 1, 1, 0, 5).unwrap();
        assert!(irka_run(&sys, None, 0, 1e-5, 10).is_err());
        assert!(irka_run(&sys, None, 5, 1e-5, 10).is_err());
    }
}
