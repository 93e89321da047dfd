//! Frequency sweeps, interpolation residuals and step responses.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::descriptor::{
    oracle_cap, schur_reduce_dense_with_cap, transfer_eval_feedback, Index1System,
    ShiftedSystem, Side,
};
use crate::error::{Error, Result};
use crate::irka::{ReducedModel, ShiftSet};
use crate::linalg::{c64, pencil_eigenvalues, to_complex, CDenseMat, DenseMat};

pub const DEFAULT_OMEGA_MIN: f64 = 1e-2;
pub const DEFAULT_OMEGA_MAX: f64 = 1e3;
pub const DEFAULT_POINTS: usize = 200;
pub const DEFAULT_STEPS: usize = 2000;

#[derive(Clone, Debug, Serialize)]
pub struct FreqResponse {
    pub omegas: Vec<f64>,
    pub sigma_full: Vec<f64>,
    pub sigma_rom: Vec<f64>,
    pub abs_err: Vec<f64>,
    pub rel_err: Vec<f64>,
}

impl FreqResponse {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Largest relative error over the points that evaluated.
    pub fn max_rel_err(&self) -> f64 {
        self.rel_err.iter().copied().filter(|v| !v.is_nan()).fold(0.0, f64::max)
    }

    pub fn missing(&self) -> usize {
        self.sigma_full.iter().filter(|v| v.is_nan()).count()
    }
}

pub fn sigma_max(g: &CDenseMat) -> f64 {
    if g.is_empty() {
        return 0.0;
    }
    g.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..points)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
        .collect()
}

pub fn sigma_sweep(
    sys: &Index1System,
    rom: &ReducedModel,
    omega_min: f64,
    omega_max: f64,
    points: usize,
) -> Result<FreqResponse> {
    sigma_sweep_feedback(sys, rom, None, omega_min, omega_max, points)
}

/// [`sigma_sweep`] against the `K0`-shifted full model.
pub fn sigma_sweep_feedback(
    sys: &Index1System,
    rom: &ReducedModel,
    k0: Option<&DenseMat>,
    omega_min: f64,
    omega_max: f64,
    points: usize,
) -> Result<FreqResponse> {
    if !(omega_min > 0.0) || !(omega_max >= omega_min) || points < 2 {
        return Err(Error::dims(format!(
            "frequency grid [{omega_min}, {omega_max}] with {points} points"
        )));
    }
    if rom.b.ncols() != sys.p() || rom.c.nrows() != sys.m() {
        return Err(Error::dims("reduced model does not match the system's inputs and outputs"));
    }
    let omegas = log_grid(omega_min, omega_max, points);
    let rows: Vec<(f64, f64, f64)> = omegas
        .par_iter()
        .map(|&w| {
            let s = c64(0.0, w);
            match (transfer_eval_feedback(sys, s, k0), rom.transfer(s)) {
                (Ok(g), Ok(gr)) => (sigma_max(&g), sigma_max(&gr), sigma_max(&(&g - &gr))),
                _ => (f64::NAN, f64::NAN, f64::NAN),
            }
        })
        .collect();
    let sigma_full: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let sigma_rom = rows.iter().map(|r| r.1).collect();
    let abs_err: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let rel_err = abs_err.iter().zip(&sigma_full).map(|(a, f)| a / f).collect();
    Ok(FreqResponse { omegas, sigma_full, sigma_rom, abs_err, rel_err })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct InterpResidual {
    #[serde(serialize_with = "ser_complex")]
    pub alpha: Complex64,
    pub right: f64,
    pub left: f64,
    pub bitangential: f64,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

fn rel(diff: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        diff / reference
    } else {
        diff
    }
}

fn check_rom(sys: &Index1System, rom: &ReducedModel, shifts: &ShiftSet) -> Result<()> {
    if rom.b.ncols() != sys.p() || rom.c.nrows() != sys.m() {
        return Err(Error::dims("reduced model does not match the system's inputs and outputs"));
    }
    shifts.validate(sys.p(), sys.m())
}

/// Per-shift right, left and bi-tangential residuals. When `k0` is given the
/// full model is the feedback-shifted one, and `rom` should be its projection.
pub fn interp_residuals(
    sys: &Index1System,
    rom: &ReducedModel,
    shifts: &ShiftSet,
    k0: Option<&DenseMat>,
) -> Result<Vec<Result<InterpResidual>>> {
    check_rom(sys, rom, shifts)?;
    Ok((0..shifts.len())
        .into_par_iter()
        .map(|i| {
            let alpha = shifts.alphas[i];
            let b = DVector::from_vec(shifts.right(i));
            let c = DVector::from_vec(shifts.left(i));
            let g = transfer_eval_feedback(sys, alpha, k0)?;
            let gr = rom.transfer(alpha)?;
            let (gb, grb) = (&g * &b, &gr * &b);
            let (cg, cgr) = (c.transpose() * &g, c.transpose() * &gr);
            let (cgb, cgrb) = ((&cg * &b)[0], (&cgr * &b)[0]);
            Ok(InterpResidual {
                alpha,
                right: rel((&gb - &grb).norm(), gb.norm()),
                left: rel((&cg - &cgr).norm(), cg.norm()),
                bitangential: rel((cgb - cgrb).norm(), cgb.norm()),
            })
        })
        .collect())
}

/// Relative mismatch of `cᵢᵀ G⁽ʲ⁾(αᵢ) bᵢ` between the full and reduced model.
pub fn hermite_residual(
    sys: &Index1System,
    rom: &ReducedModel,
    shifts: &ShiftSet,
    i: usize,
    j: usize,
    k0: Option<&DenseMat>,
) -> Result<f64> {
    check_rom(sys, rom, shifts)?;
    if i >= shifts.len() || j > 1 {
        return Err(Error::dims(format!("shift index {i} or moment order {j} out of range")));
    }
    let alpha = shifts.alphas[i];
    let b = shifts.right(i);
    let c = shifts.left(i);
    let (bv, cv) = (DVector::from_vec(b.clone()), DVector::from_vec(c.clone()));
    let (full, red) = if j == 0 {
        let g = transfer_eval_feedback(sys, alpha, k0)?;
        let gr = rom.transfer(alpha)?;
        ((cv.transpose() * g * &bv)[0], (cv.transpose() * gr * &bv)[0])
    } else {
        let f = ShiftedSystem::new(sys, alpha, k0)?;
        let x = f.solve_tangent(Side::Right, &b)?;
        let w = f.solve_tangent(Side::Left, &c)?;
        let ex = sys.e1().mul_vec(&x);
        let full = -w.iter().zip(&ex).map(|(a, b)| a * b).sum::<Complex64>();

        let pencil = to_complex(&rom.e) * alpha - to_complex(&rom.a);
        let lu = pencil.clone().lu();
        let xr = lu
            .solve(&(to_complex(&rom.b) * &bv))
            .ok_or(Error::SingularAtShift { s: alpha })?;
        let wr = pencil
            .transpose()
            .lu()
            .solve(&(to_complex(&rom.c).transpose() * &cv))
            .ok_or(Error::SingularAtShift { s: alpha })?;
        let red = -(wr.transpose() * to_complex(&rom.e) * xr)[0];
        (full, red)
    };
    Ok(rel((full - red).norm(), full.norm()))
}

#[derive(Clone, Debug)]
pub struct StepResponse {
    pub times: Vec<f64>,
    /// Row `k` is `y(times[k])`.
    pub outputs: DenseMat,
    pub input: usize,
    pub amplitude: f64,
}

impl StepResponse {
    pub fn final_output(&self) -> DVector<f64> {
        self.outputs.row(self.outputs.nrows() - 1).transpose()
    }

    pub fn max_abs(&self) -> f64 {
        self.outputs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `50 / |Re λ|` for the slowest finite mode of `(𝒜 − ℬK, ℰ)`, else `100`.
pub fn default_horizon(sys: &Index1System, k: Option<&DenseMat>) -> Result<f64> {
    let g = schur_reduce_dense_with_cap(sys, oracle_cap())?;
    let a = match k {
        Some(k) => &g.a - &g.b * k,
        None => g.a.clone(),
    };
    let slow = pencil_eigenvalues(&a, &g.e)?
        .iter()
        .map(|z| z.re.abs())
        .filter(|v| *v > 0.0)
        .fold(f64::INFINITY, f64::min);
    Ok(if slow.is_finite() { 50.0 / slow } else { 100.0 })
}

/// Trapezoidal simulation of `ℰẋ = (𝒜 − ℬK)x + ℬu`, `y = (𝒞 − 𝒟K)x + 𝒟u`
/// from rest, with a unit step on input `channel`. `t_end` and `dt`
/// default to [`default_horizon`] and `t_end / 2000`.
pub fn step_response(
    sys: &Index1System,
    k: Option<&DenseMat>,
    channel: usize,
    t_end: Option<f64>,
    dt: Option<f64>,
) -> Result<StepResponse> {
    if channel >= sys.p() {
        return Err(Error::dims(format!("input channel {channel} but p = {}", sys.p())));
    }
    if let Some(k) = k {
        if k.shape() != (sys.p(), sys.n1()) {
            return Err(Error::dims(format!("feedback is {:?}, expected {:?}", k.shape(), (sys.p(), sys.n1()))));
        }
    }
    let g = schur_reduce_dense_with_cap(sys, oracle_cap())?;
    let t_end = match t_end {
        Some(t) => t,
        None => default_horizon(sys, k)?,
    };
    let dt = dt.unwrap_or(t_end / DEFAULT_STEPS as f64);
    if !(t_end > 0.0) || !(dt > 0.0) {
        return Err(Error::dims(format!("t_end = {t_end}, dt = {dt}")));
    }
    let (a, c) = match k {
        Some(k) => (&g.a - &g.b * k, &g.c - &g.dm * k),
        None => (g.a.clone(), g.c.clone()),
    };
    let steps = (t_end / dt).round().max(1.0) as usize;
    let n = a.nrows();
    let lhs = &g.e - &a * (0.5 * dt);
    let rhs_m = &g.e + &a * (0.5 * dt);
    let lu = lhs.lu();
    let forcing = g.b.column(channel) * dt;
    let feed = g.dm.column(channel).clone_owned();

    let mut x = DVector::<f64>::zeros(n);
    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = DMatrix::zeros(steps + 1, sys.m());
    times.push(0.0);
    outputs.set_row(0, &(&c * &x + &feed).transpose());
    for s in 1..=steps {
        let rhs = &rhs_m * &x + &forcing;
        x = lu
            .solve(&rhs)
            .ok_or(Error::SingularMatrix { column: 0 })?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::ConvergenceFailure(format!("step response overflowed at t = {}", s as f64 * dt)));
        }
        times.push(s as f64 * dt);
        outputs.set_row(s, &(&c * &x + &feed).transpose());
    }
    Ok(StepResponse { times, outputs, input: channel, amplitude: 1.0 })
}

/// Steady-state output of a unit step on `channel`: `−(𝒞 − 𝒟K)(𝒜 − ℬK)⁻¹ℬe + 𝒟e`.
pub fn dc_gain(sys: &Index1System, k: Option<&DenseMat>, channel: usize) -> Result<DVector<f64>> {
    let g = schur_reduce_dense_with_cap(sys, oracle_cap())?;
    let (a, c) = match k {
        Some(k) => (&g.a - &g.b * k, &g.c - &g.dm * k),
        None => (g.a.clone(), g.c.clone()),
    };
    let x = a
        .lu()
        .solve(&g.b.column(channel).clone_owned())
        .ok_or(Error::SingularMatrix { column: 0 })?;
    Ok(-(c * x) + g.dm.column(channel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{gen_synthetic, schur_reduce_dense, SystemBlocks};
    use crate::irka::{assemble_rom, build_projectors, init_shifts, irka_run, Projectors, ShiftStrategy};
    use crate::linalg::SparseMat;

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

    fn full_rom(sys: &Index1System) -> (ReducedModel, Projectors) {
        let n = sys.n1();
        let proj = Projectors {
            v: DMatrix::identity(n, n),
            w: DMatrix::identity(n, n),
            shifts: init_shifts(n, sys.p(), sys.m(), ShiftStrategy::LogSpaced, 0),
            dropped: 0,
        };
        (assemble_rom(sys, &proj).unwrap(), proj)
    }

    #[test]
    fn default_grid() {
        let sys = gen_synthetic(6, 4, 1, 1, 0, 3).unwrap();
        let (rom, _) = full_rom(&sys);
        let fr = sigma_sweep(&sys, &rom, DEFAULT_OMEGA_MIN, DEFAULT_OMEGA_MAX, DEFAULT_POINTS).unwrap();
        assert_eq!(fr.len(), 200);
        assert!((fr.omegas[0] - 1e-2).abs() < 1e-15);
        assert!((fr.omegas[199] - 1e3).abs() < 1e-9);
        assert!(fr.abs_err.iter().all(|e| *e <= 1e-10));
        for i in 0..fr.len() {
            assert_eq!(fr.rel_err[i], fr.abs_err[i] / fr.sigma_full[i]);
        }
    }

    #[test]
    fn scalar_relative_error() {
        let sys = scalar(-2.0);
        let rom = ReducedModel {
            e: DMatrix::from_element(1, 1, 1.0),
            a: DMatrix::from_element(1, 1, -4.0),
            b: DMatrix::from_element(1, 1, 1.0),
            c: DMatrix::from_element(1, 1, 1.0),
            d: DMatrix::zeros(1, 1),
        };
        let fr = sigma_sweep(&sys, &rom, 0.1, 10.0, 5).unwrap();
        for (i, w) in fr.omegas.iter().enumerate() {
            let s = c64(0.0, *w);
            let g = 1.0 / (s + 3.0);
            let gr = 1.0 / (s + 4.0);
            let expect = (g - gr).norm() / g.norm();
            assert!((fr.rel_err[i] - expect).abs() <= 1e-14);
        }
    }

    #[test]
    fn bad_grid_rejected() {
        let sys = scalar(-2.0);
        let (rom, _) = full_rom(&sys);
        assert!(sigma_sweep(&sys, &rom, 0.0, 1.0, 10).is_err());
        assert!(sigma_sweep(&sys, &rom, 1.0, 10.0, 1).is_err());
    }

    #[test]
    fn full_order_residuals_vanish() {
        let sys = gen_synthetic(8, 5, 2, 2, 0, 6).unwrap();
        let (rom, _) = full_rom(&sys);
        let shifts = init_shifts(4, 2, 2, ShiftStrategy::RandomStable, 9);
        for r in interp_residuals(&sys, &rom, &shifts, None).unwrap() {
            let r = r.unwrap();
            assert!(r.right <= 1e-10 && r.left <= 1e-10 && r.bitangential <= 1e-10, "{r:?}");
        }
    }

    #[test]
    fn converged_irka_interpolates() {
        let sys = gen_synthetic(20, 10, 2, 2, 0, 13).unwrap();
        let (rom, proj, rep) = irka_run(&sys, None, 4, 1e-5, 150).unwrap();
        assert!(rep.converged);
        for r in interp_residuals(&sys, &rom, &proj.shifts, None).unwrap() {
            let r = r.unwrap();
            assert!(r.right <= 1e-6 && r.left <= 1e-6 && r.bitangential <= 1e-6, "{r:?}");
        }
        for i in 0..proj.shifts.len() {
            let h0 = hermite_residual(&sys, &rom, &proj.shifts, i, 0, None).unwrap();
            let h1 = hermite_residual(&sys, &rom, &proj.shifts, i, 1, None).unwrap();
            assert!(h0 <= 1e-6 && h1 <= 1e-5, "{h0} {h1}");
        }
    }

    #[test]
    fn hermite_j0_is_bitangential() {
        let sys = gen_synthetic(12, 6, 2, 2, 0, 2).unwrap();
        let shifts = init_shifts(4, 2, 2, ShiftStrategy::LogSpaced, 0);
        let proj = build_projectors(&sys, None, &shifts).unwrap();
        let rom = assemble_rom(&sys, &proj).unwrap();
        let other = init_shifts(2, 2, 2, ShiftStrategy::RandomStable, 4);
        let res = interp_residuals(&sys, &rom, &other, None).unwrap();
        for i in 0..other.len() {
            let h0 = hermite_residual(&sys, &rom, &other, i, 0, None).unwrap();
            let bt = res[i].as_ref().unwrap().bitangential;
            assert!((h0 - bt).abs() <= 1e-12 * bt.max(1.0));
        }
    }

    #[test]
    fn wrong_shift_is_not_interpolated() {
        let sys = gen_synthetic(30, 10, 2, 2, 0, 17).unwrap();
        let shifts = init_shifts(3, 2, 2, ShiftStrategy::LogSpaced, 0);
        let proj = build_projectors(&sys, None, &shifts).unwrap();
        let rom = assemble_rom(&sys, &proj).unwrap();
        let mut wrong = shifts.clone();
        wrong.alphas = vec![c64(3.0, 0.0), c64(7.0, 0.0), c64(70.0, 0.0)];
        let res = interp_residuals(&sys, &rom, &wrong, None).unwrap();
        assert!(res.iter().any(|r| r.as_ref().unwrap().right > 1e-3));
        let h1 = (0..3)
            .map(|i| hermite_residual(&sys, &rom, &wrong, i, 1, None).unwrap())
            .fold(0.0, f64::max);
        assert!(h1 > 1e-3);
    }

    #[test]
    fn scalar_step_final_value() {
        let sys = scalar(-2.0);
        let st = step_response(&sys, None, 0, Some(30.0), Some(0.01)).unwrap();
        assert!((st.final_output()[0] - 1.0 / 3.0).abs() < 1e-10);
        assert!((dc_gain(&sys, None, 0).unwrap()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(st.times.len(), st.outputs.nrows());
        assert!(st.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn unstable_scalar_diverges_then_settles() {
        // J1 = 2 gives 𝒜 = 2 − 1 = 1.
        let sys = scalar(2.0);
        let open = step_response(&sys, None, 0, Some(20.0), None).unwrap();
        let y: Vec<f64> = open.outputs.column(0).iter().copied().collect();
        assert!(y.windows(2).all(|w| w[1] >= w[0]));
        assert!(y[y.len() - 1] > 1e8);
        let k = DMatrix::from_element(1, 1, 2.0);
        let closed = step_response(&sys, Some(&k), 0, Some(20.0), None).unwrap();
        let dc = dc_gain(&sys, Some(&k), 0).unwrap()[0];
        assert!((closed.final_output()[0] - dc).abs() <= 1e-3);
    }

    #[test]
    fn trapezoid_is_second_order() {
        let sys = scalar(-2.0);
        let exact = |t: f64| (1.0 - (-3.0 * t).exp()) / 3.0;
        let err = |dt: f64| {
            let st = step_response(&sys, None, 0, Some(1.0), Some(dt)).unwrap();
            (st.final_output()[0] - exact(1.0)).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn horizon_from_slowest_mode() {
        let sys = scalar(-2.0);
        assert!((default_horizon(&sys, None).unwrap() - 50.0 / 3.0).abs() < 1e-12);
        let g = schur_reduce_dense(&sys).unwrap();
        assert!((g.a[(0, 0)] + 3.0).abs() < 1e-15);
    }
}
