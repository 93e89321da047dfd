//! Reduced Riccati feedback, lift to full order, and closed-loop checks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::descriptor::{oracle_cap, schur_reduce_dense_with_cap, Index1System};
use crate::error::{Error, Result};
use crate::irka::{irka_run_with, IrkaOptions, IrkaReport, Projectors, ReducedModel};
use crate::linalg::{finite_pencil_eigenvalues, pencil_eigenvalues, spectral_abscissa, DenseMat, SparseMat};
use crate::matrixeq::{bernoulli_stabilize, care_solve, CareSolution};

#[derive(Clone, Debug)]
pub struct FeedbackSet {
    /// `p × n1`, zero when the open loop was stable or could not be checked.
    pub k0: DenseMat,
    /// `p × r`.
    pub k_hat: DenseMat,
    /// `p × n1`, the lifted `K̂`.
    pub k_opt: DenseMat,
    /// The feedback actually closed around the plant: `K0 + K°`, or `K°` alone
    /// in the printed variant.
    pub k_applied: DenseMat,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    #[serde(serialize_with = "ser_eigs")]
    pub eigenvalues: Vec<Complex64>,
    pub abscissa: f64,
    pub unstable_count: usize,
    /// False when the system was above the dense cap and nothing was computed.
    pub verified: bool,
}

fn ser_eigs<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

impl SpectrumReport {
    pub fn from_eigenvalues(eigenvalues: Vec<Complex64>) -> Self {
        SpectrumReport {
            abscissa: spectral_abscissa(&eigenvalues),
            unstable_count: eigenvalues.iter().filter(|z| z.re > 0.0).count(),
            eigenvalues,
            verified: true,
        }
    }

    pub fn unverified() -> Self {
        SpectrumReport {
            eigenvalues: Vec::new(),
            abscissa: f64::NAN,
            unstable_count: 0,
            verified: false,
        }
    }
}

/// `K̂ = B̂ᵀX̂`.
pub fn reduced_feedback(rom: &ReducedModel, care: &CareSolution) -> Result<DenseMat> {
    if care.x.shape() != (rom.order(), rom.order()) {
        return Err(Error::dims(format!(
            "CARE solution is {:?} for a reduced model of order {}",
            care.x.shape(),
            rom.order()
        )));
    }
    Ok(rom.b.transpose() * &care.x)
}

/// Which projection basis carries the reduced feedback back to full order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LiftBasis {
    /// `K° = K̂VᵀE1`.
    #[default]
    V,
    /// `K° = K̂WᵀE1`, the lift consistent with the Petrov-Galerkin state map
    /// `x̂ = Ê⁻¹WᵀE1x`.
    W,
}

/// `K̂ VᵀE1` applied through the sparse `E1`.
pub fn lift_feedback(k_hat: &DenseMat, proj: &Projectors, sys: &Index1System) -> Result<DenseMat> {
    lift_feedback_with(k_hat, proj, sys, LiftBasis::V)
}

pub fn lift_feedback_with(
    k_hat: &DenseMat,
    proj: &Projectors,
    sys: &Index1System,
    basis: LiftBasis,
) -> Result<DenseMat> {
    let q = match basis {
        LiftBasis::V => &proj.v,
        LiftBasis::W => &proj.w,
    };
    lift_with_basis(k_hat, q, sys.e1())
}

fn lift_with_basis(k_hat: &DenseMat, q: &DenseMat, e1: &SparseMat) -> Result<DenseMat> {
    if q.ncols() != k_hat.ncols() || q.nrows() != e1.nrows() {
        return Err(Error::dims(format!(
            "lift: K̂ is {:?}, basis is {:?}, E1 is {}×{}",
            k_hat.shape(),
            q.shape(),
            e1.nrows(),
            e1.ncols()
        )));
    }
    // (K̂QᵀE1)ᵀ = E1ᵀ(QK̂ᵀ)
    Ok(e1.tr_mul_dense(&(q * k_hat.transpose())).transpose())
}

fn check_feedback(sys: &Index1System, k: &DenseMat) -> Result<()> {
    if k.shape() != (sys.p(), sys.n1()) {
        return Err(Error::dims(format!(
            "feedback is {:?}, expected {:?}",
            k.shape(),
            (sys.p(), sys.n1())
        )));
    }
    Ok(())
}

/// Finite spectrum of `(𝒜 − ℬK, ℰ)` from the dense Schur complement.
pub fn closed_loop_spectrum(sys: &Index1System, k: &DenseMat) -> Result<SpectrumReport> {
    check_feedback(sys, k)?;
    let g = schur_reduce_dense_with_cap(sys, oracle_cap())?;
    let eig = pencil_eigenvalues(&(&g.a - &g.b * k), &g.e)?;
    Ok(SpectrumReport::from_eigenvalues(eig))
}

/// Finite spectrum of the closed-loop block pencil
/// `([J1−B1K, J2; J3−B2K, J4], diag(E1, 0))`.
pub fn closed_loop_spectrum_block(sys: &Index1System, k: &DenseMat) -> Result<SpectrumReport> {
    check_feedback(sys, k)?;
    let cap = oracle_cap();
    if sys.order() > cap {
        return Err(Error::OracleCapExceeded { order: sys.order(), cap });
    }
    let b = sys.blocks();
    let (n1, n) = (sys.n1(), sys.order());
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (n1, n1)).copy_from(&(b.j1.to_dense() - b.b1.to_dense() * k));
    a.view_mut((0, n1), (n1, n - n1)).copy_from(&b.j2.to_dense());
    a.view_mut((n1, 0), (n - n1, n1)).copy_from(&(b.j3.to_dense() - b.b2.to_dense() * k));
    a.view_mut((n1, n1), (n - n1, n - n1)).copy_from(&b.j4.to_dense());
    let mut e = DMatrix::zeros(n, n);
    e.view_mut((0, 0), (n1, n1)).copy_from(&b.e1.to_dense());
    let eig = finite_pencil_eigenvalues(&a, &e, n1)?;
    Ok(SpectrumReport::from_eigenvalues(eig))
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub irka: IrkaOptions,
    pub lift: LiftBasis,
    /// Close the loop with `K0 + K°` rather than `K°` alone.
    pub include_k0: bool,
    /// Run the dense spectrum checks and the Bernoulli initial feedback.
    pub verify: bool,
}

impl PipelineConfig {
    /// Riccati design on the `K0`-stabilized reduced model, lifted through
    /// `W` and added to `K0`.
    pub fn new(r: usize) -> Self {
        let mut irka = IrkaOptions::new(r);
        irka.rom.project_shifted = true;
        Self { irka, lift: LiftBasis::W, include_k0: true, verify: true }
    }

    /// Original-block reduced model, `V` lift, and `K°` applied on its own.
    pub fn verbatim(r: usize) -> Self {
        Self {
            irka: IrkaOptions::new(r),
            lift: LiftBasis::V,
            include_k0: false,
            verify: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub feedback: FeedbackSet,
    pub rom: ReducedModel,
    pub projectors: Projectors,
    pub irka: IrkaReport,
    pub care: CareSolution,
    pub before: SpectrumReport,
    pub after: SpectrumReport,
}

pub fn stabilize_pipeline(sys: &Index1System, r: usize, tol: f64, imax: usize) -> Result<PipelineOutcome> {
    let mut cfg = PipelineConfig::new(r);
    cfg.irka.tol = tol;
    cfg.irka.imax = imax;
    stabilize_pipeline_with(sys, &cfg)
}

pub fn stabilize_pipeline_with(sys: &Index1System, cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let cap = oracle_cap();
    let checkable = cfg.verify && sys.order() <= cap;
    let (before, k0) = if checkable {
        let g = schur_reduce_dense_with_cap(sys, cap)?;
        let before = SpectrumReport::from_eigenvalues(pencil_eigenvalues(&g.a, &g.e)?);
        let k0 = if before.unstable_count > 0 {
            bernoulli_stabilize(&g)?.k0
        } else {
            DMatrix::zeros(sys.p(), sys.n1())
        };
        (before, k0)
    } else {
        (SpectrumReport::unverified(), DMatrix::zeros(sys.p(), sys.n1()))
    };

    let (rom, projectors, irka) = irka_run_with(sys, Some(&k0), &cfg.irka)?;
    let care = care_solve(&rom.e, &rom.a, &rom.b, &rom.c).map_err(|e| match e {
        Error::NoStabilizingSolution(msg) => Error::NoStabilizingSolution(format!(
            "reduced model of order {} ({} IRKA iterations, converged: {}): {msg}",
            rom.order(),
            irka.iterations,
            irka.converged
        )),
        other => other,
    })?;
    let k_hat = reduced_feedback(&rom, &care)?;
    let k_opt = lift_feedback_with(&k_hat, &projectors, sys, cfg.lift)?;
    let k_applied = if cfg.include_k0 { &k0 + &k_opt } else { k_opt.clone() };
    let after = if checkable {
        closed_loop_spectrum(sys, &k_applied)?
    } else {
        SpectrumReport::unverified()
    };
    Ok(PipelineOutcome {
        feedback: FeedbackSet { k0, k_hat, k_opt, k_applied },
        rom,
        projectors,
        irka,
        care,
        before,
        after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{gen_synthetic, schur_reduce_dense, SystemBlocks};
    use crate::irka::{init_shifts, ShiftStrategy};
    use crate::linalg::cmp_re_im;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(j1: f64) -> Index1System {
        let one = |v: f64| SparseMat::from_triplets(1, 1, &[(0, 0, v)]).unwrap();
        Index1System::new(SystemBlocks {
            e1: one(1.0),
            j1: one(j1),
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

    fn projectors(v: DenseMat) -> Projectors {
        let r = v.ncols();
        Projectors { w: v.clone(), v, shifts: init_shifts(r, 1, 1, ShiftStrategy::LogSpaced, 0), dropped: 0 }
    }

    fn scalar_rom() -> ReducedModel {
        let s = |v| DMatrix::from_element(1, 1, v);
        ReducedModel { e: s(1.0), a: s(-1.0), b: s(1.0), c: s(1.0), d: s(0.0) }
    }

    #[test]
    fn reduced_feedback_examples() {
        let rom = scalar_rom();
        let care = care_solve(&rom.e, &rom.a, &rom.b, &rom.c).unwrap();
        let k = reduced_feedback(&rom, &care).unwrap();
        assert!((k[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let zero = CareSolution { x: DMatrix::zeros(1, 1), ..care };
        assert_eq!(reduced_feedback(&rom, &zero).unwrap()[(0, 0)], 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = DMatrix::from_fn(4, 2, |_, _| rng.random::<f64>());
        let x = DMatrix::from_fn(4, 4, |_, _| rng.random::<f64>());
        let rom = ReducedModel {
            e: DMatrix::identity(4, 4),
            a: -DMatrix::identity(4, 4),
            b: b.clone(),
            c: DMatrix::zeros(1, 4),
            d: DMatrix::zeros(1, 2),
        };
        let sol = CareSolution { x: x.clone(), ..zero };
        assert_eq!(reduced_feedback(&rom, &sol).unwrap(), b.transpose() * x);
    }

    #[test]
    fn lift_examples() {
        let sys = scalar(-2.0);
        let k_hat = DMatrix::from_element(1, 1, 0.414214);
        let k = lift_feedback(&k_hat, &projectors(DMatrix::identity(1, 1)), &sys).unwrap();
        assert_eq!(k[(0, 0)], 0.414214);

        let sys = gen_synthetic(9, 4, 2, 2, 0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = crate::linalg::qr_orth(&DMatrix::from_fn(9, 3, |_, _| rng.random::<f64>())).unwrap().q;
        let k_hat = DMatrix::from_fn(2, 3, |_, _| rng.random::<f64>());
        let lifted = lift_feedback(&k_hat, &projectors(v.clone()), &sys).unwrap();
        let oracle = &k_hat * v.transpose() * sys.e1().to_dense();
        assert!((&lifted - oracle).abs().max() <= 1e-12);
    }

    #[test]
    fn identity_lift_with_identity_e1() {
        let sys = scalar(-2.0);
        let k_hat = DMatrix::from_element(1, 1, 3.5);
        let k = lift_feedback_with(&k_hat, &projectors(DMatrix::identity(1, 1)), &sys, LiftBasis::W).unwrap();
        assert_eq!(k, k_hat);
    }

    #[test]
    fn zero_feedback_gives_open_loop_spectrum() {
        let sys = gen_synthetic(20, 12, 2, 2, 3, 8).unwrap();
        let rep = closed_loop_spectrum(&sys, &DMatrix::zeros(2, 20)).unwrap();
        assert_eq!(rep.unstable_count, 3);
        assert!(rep.verified);
        let block = closed_loop_spectrum_block(&sys, &DMatrix::zeros(2, 20)).unwrap();
        let mut a = rep.eigenvalues.clone();
        let mut b = block.eigenvalues.clone();
        a.sort_by(cmp_re_im);
        b.sort_by(cmp_re_im);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() <= 1e-8 * x.norm().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn block_and_schur_spectra_agree_under_feedback() {
        let sys = gen_synthetic(15, 10, 2, 2, 1, 27).unwrap();
        let k = DMatrix::from_fn(2, 15, |i, j| 0.1 * ((i * 7 + j) as f64).sin());
        let a = closed_loop_spectrum(&sys, &k).unwrap();
        let b = closed_loop_spectrum_block(&sys, &k).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).norm() <= 1e-8 * x.norm().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn scalar_bernoulli_spectrum() {
        let sys = scalar(2.0);
        let rep = closed_loop_spectrum(&sys, &DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(rep.eigenvalues.len(), 1);
        assert!((rep.eigenvalues[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-14);
        assert_eq!(rep.unstable_count, 0);
    }

    #[test]
    fn stable_branch_keeps_zero_k0() {
        let sys = gen_synthetic(20, 10, 2, 2, 0, 3).unwrap();
        let out = stabilize_pipeline(&sys, 6, 1e-5, 150).unwrap();
        assert_eq!(out.feedback.k0.abs().max(), 0.0);
        assert!(out.after.abscissa < 0.0);
    }

    #[test]
    fn pipeline_stabilizes_three_unstable() {
        let sys = gen_synthetic(40, 30, 2, 2, 3, 7).unwrap();
        let out = stabilize_pipeline(&sys, 10, 1e-5, 150).unwrap();
        assert_eq!(out.before.unstable_count, 3);
        assert_eq!(out.after.unstable_count, 0, "{:?}", out.after.abscissa);
        let g = schur_reduce_dense(&sys).unwrap();
        assert_eq!(out.feedback.k_opt.shape(), (2, g.a.nrows()));
    }

    #[test]
    fn bad_shapes_rejected() {
        let sys = scalar(-2.0);
        assert!(closed_loop_spectrum(&sys, &DMatrix::zeros(2, 1)).is_err());
        assert!(lift_feedback(&DMatrix::zeros(1, 2), &projectors(DMatrix::identity(1, 1)), &sys).is_err());
    }
}
