//! Seeded synthetic index-1 systems with a planted finite spectrum.
//!
//! The differential part is built as `𝒜 = E1 · P T Pᵀ` where `T` is block
//! upper triangular with 1×1 and 2×2 diagonal blocks holding the chosen
//! eigenvalues, so the spectrum of `(𝒜, E1)` is exactly the planted one. The
//! algebraic coupling is then added back through `J1 = 𝒜 + J2 J4⁻¹ J3` with a
//! `J4` whose inverse is known in closed form.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::system::{oracle_cap, schur_reduce_dense_with_cap, Index1System, SystemBlocks};
use crate::error::{Error, Result};
use crate::linalg::{pencil_eigenvalues, SparseMat};
use nalgebra::DMatrix;

/// Knobs of the synthetic generator; [`SyntheticSpec::new`] fills the defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub m: usize,
    pub k_unstable: usize,
    pub seed: u64,
    /// Decades spanned by the stable real parts, `−10^lo ..= −10^hi`.
    pub stable_decades: (f64, f64),
    /// Range of the unstable real parts.
    pub unstable_re: (f64, f64),
    /// Fraction of stable eigenvalues placed in complex pairs.
    pub complex_fraction: f64,
    /// `|Im| / |Re|` range for stable complex pairs.
    pub damping_ratio: (f64, f64),
    /// Expected number of coupling entries per row of the triangular core.
    pub coupling_per_row: f64,
}

impl SyntheticSpec {
    pub fn new(n1: usize, n2: usize, p: usize, m: usize, k_unstable: usize, seed: u64) -> Self {
        Self {
            n1,
            n2,
            p,
            m,
            k_unstable,
            seed,
            stable_decades: (-1.0, 2.0),
            unstable_re: (0.1, 2.0),
            complex_fraction: 0.5,
            damping_ratio: (0.2, 2.0),
            coupling_per_row: 1.5,
        }
    }
}

/// One diagonal block of the triangular core.
#[derive(Clone, Copy, Debug)]
enum Mode {
    Real(f64),
    Pair { re: f64, im: f64, skew: f64 },
}

impl Mode {
    fn size(self) -> usize {
        match self {
            Mode::Real(_) => 1,
            Mode::Pair { .. } => 2,
        }
    }

    fn scale(self) -> f64 {
        match self {
            Mode::Real(v) => v.abs(),
            Mode::Pair { re, im, .. } => re.hypot(im),
        }
    }
}

/// [`gen_synthetic_spec`] with default knobs.
pub fn gen_synthetic(
    n1: usize,
    n2: usize,
    p: usize,
    m: usize,
    k_unstable: usize,
    seed: u64,
) -> Result<Index1System> {
    gen_synthetic_spec(&SyntheticSpec::new(n1, n2, p, m, k_unstable, seed))
}

pub fn gen_synthetic_spec(spec: &SyntheticSpec) -> Result<Index1System> {
    let &SyntheticSpec {
        n1,
        n2,
        p,
        m,
        k_unstable,
        ..
    } = spec;
    if n1 == 0 || p == 0 || m == 0 {
        return Err(Error::Infeasible(format!(
            "need n1, p, m >= 1, got n1={n1}, p={p}, m={m}"
        )));
    }
    if k_unstable > n1 {
        return Err(Error::Infeasible(format!(
            "{k_unstable} unstable eigenvalues requested for n1 = {n1}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let modes = plant_modes(spec, &mut rng);
    let core = triangular_core(&modes, spec.coupling_per_row, n1, &mut rng)?;

    let mut perm: Vec<usize> = (0..n1).collect();
    perm.shuffle(&mut rng);
    let a_std = SparseMat::from_triplets(
        n1,
        n1,
        &core
            .triplets()
            .map(|(i, j, v)| (perm[i], perm[j], v))
            .collect::<Vec<_>>(),
    )?;

    let mut e_trips = Vec::new();
    for i in 0..n1 {
        e_trips.push((i, i, rng.random_range(1.0..2.0)));
        if i + 1 < n1 {
            e_trips.push((i, i + 1, rng.random_range(-0.2..0.2)));
            e_trips.push((i + 1, i, rng.random_range(-0.2..0.2)));
        }
    }
    let e1 = SparseMat::from_triplets(n1, n1, &e_trips)?;
    let a_schur = e1.mul_sparse(&a_std)?;

    let (j4, j4_inv) = algebraic_block(n2, &mut rng)?;
    let j2 = random_sparse(n1, n2, 2.0 / n1.max(1) as f64, 1.0, &mut rng)?;
    let j3 = random_sparse(n2, n1, 2.0 / n2.max(1) as f64, 1.0, &mut rng)?;
    let coupling = j2.mul_sparse(&j4_inv)?.mul_sparse(&j3)?;
    let j1 = a_schur.add_scaled(1.0, &coupling, 1.0)?;

    let b1 = random_sparse_full_cols(n1, p, 0.3, &mut rng)?;
    let b2 = random_sparse(n2, p, 0.1, 1.0, &mut rng)?;
    let c1 = random_sparse_full_cols(n1, m, 0.3, &mut rng)?.transpose();
    let c2 = random_sparse(m, n2, 0.1, 1.0, &mut rng)?;

    let sys = Index1System::new(SystemBlocks {
        e1,
        j1,
        j2,
        j3,
        j4,
        b1,
        b2,
        c1,
        c2,
        d: DMatrix::zeros(m, p),
    })?;

    if sys.order() <= oracle_cap() {
        let g = schur_reduce_dense_with_cap(&sys, usize::MAX)?;
        let eig = pencil_eigenvalues(&g.a, &g.e)?;
        let unstable = eig.iter().filter(|z| z.re > 0.0).count();
        if unstable != k_unstable {
            return Err(Error::Infeasible(format!(
                "planted {k_unstable} unstable eigenvalues but the oracle finds {unstable}"
            )));
        }
    }
    Ok(sys)
}

fn plant_modes(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Mode> {
    let mut modes = Vec::new();
    let mut left = spec.k_unstable;
    while left > 0 {
        let re = rng.random_range(spec.unstable_re.0..=spec.unstable_re.1);
        if left >= 2 && rng.random_bool(0.5) {
            let im = re * rng.random_range(0.5..3.0);
            modes.push(Mode::Pair { re, im, skew: rng.random_range(0.5..2.0) });
            left -= 2;
        } else {
            modes.push(Mode::Real(re));
            left -= 1;
        }
    }
    let mut left = spec.n1 - spec.k_unstable;
    let (lo, hi) = spec.stable_decades;
    while left > 0 {
        let re = -10f64.powf(rng.random_range(lo..=hi));
        if left >= 2 && rng.random_bool(spec.complex_fraction.clamp(0.0, 1.0)) {
            let im = -re * rng.random_range(spec.damping_ratio.0..=spec.damping_ratio.1);
            modes.push(Mode::Pair { re, im, skew: rng.random_range(0.5..2.0) });
            left -= 2;
        } else {
            modes.push(Mode::Real(re));
            left -= 1;
        }
    }
    modes.shuffle(rng);
    modes
}

fn triangular_core(
    modes: &[Mode],
    coupling_per_row: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SparseMat> {
    let mut starts = Vec::with_capacity(modes.len());
    let mut trips = Vec::new();
    let mut at = 0;
    for &mode in modes {
        starts.push(at);
        match mode {
            Mode::Real(v) => trips.push((at, at, v)),
            Mode::Pair { re, im, skew } => {
                trips.push((at, at, re));
                trips.push((at + 1, at + 1, re));
                trips.push((at, at + 1, im * skew));
                trips.push((at + 1, at, -im / skew));
            }
        }
        at += mode.size();
    }
    // Coupling only from later blocks into earlier ones keeps the planted spectrum exact.
    let nb = modes.len();
    let prob = if nb > 1 { (coupling_per_row / nb as f64).min(1.0) } else { 0.0 };
    for bi in 0..nb {
        for bj in bi + 1..nb {
            if !rng.random_bool(prob) {
                continue;
            }
            let mag = 0.5 * modes[bi].scale().min(modes[bj].scale()).max(0.1);
            let r = starts[bi] + rng.random_range(0..modes[bi].size());
            let c = starts[bj] + rng.random_range(0..modes[bj].size());
            trips.push((r, c, mag * rng.random_range(-1.0..1.0)));
        }
    }
    SparseMat::from_triplets(n, n, &trips)
}

/// Permuted block-diagonal `J4` together with its exact sparse inverse.
fn algebraic_block(n2: usize, rng: &mut ChaCha8Rng) -> Result<(SparseMat, SparseMat)> {
    let mut trips = Vec::new();
    let mut inv = Vec::new();
    let mut at = 0;
    while at < n2 {
        if at + 1 < n2 && rng.random_bool(0.5) {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let a = sign * rng.random_range(2.0..3.0);
            let d = sign * rng.random_range(2.0..3.0);
            let b = rng.random_range(-1.0..1.0);
            let c = rng.random_range(-1.0..1.0);
            let det = a * d - b * c;
            trips.extend([(at, at, a), (at, at + 1, b), (at + 1, at, c), (at + 1, at + 1, d)]);
            inv.extend([
                (at, at, d / det),
                (at, at + 1, -b / det),
                (at + 1, at, -c / det),
                (at + 1, at + 1, a / det),
            ]);
            at += 2;
        } else {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let a = sign * rng.random_range(1.0..3.0);
            trips.push((at, at, a));
            inv.push((at, at, 1.0 / a));
            at += 1;
        }
    }
    let mut rp: Vec<usize> = (0..n2).collect();
    let mut cp: Vec<usize> = (0..n2).collect();
    rp.shuffle(rng);
    cp.shuffle(rng);
    // J4 = P Bd Qᵀ, J4⁻¹ = Q Bd⁻¹ Pᵀ.
    let j4 = SparseMat::from_triplets(
        n2,
        n2,
        &trips.iter().map(|&(i, j, v)| (rp[i], cp[j], v)).collect::<Vec<_>>(),
    )?;
    let j4_inv = SparseMat::from_triplets(
        n2,
        n2,
        &inv.iter().map(|&(i, j, v)| (cp[i], rp[j], v)).collect::<Vec<_>>(),
    )?;
    Ok((j4, j4_inv))
}

fn random_sparse(
    nrows: usize,
    ncols: usize,
    density: f64,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SparseMat> {
    let density = density.clamp(0.0, 1.0);
    let mut trips = Vec::new();
    for j in 0..ncols {
        for i in 0..nrows {
            if rng.random_bool(density) {
                trips.push((i, j, scale * rng.random_range(-1.0..1.0)));
            }
        }
    }
    SparseMat::from_triplets(nrows, ncols, &trips)
}

/// Random sparse matrix where every column has at least one entry.
fn random_sparse_full_cols(
    nrows: usize,
    ncols: usize,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SparseMat> {
    let mut trips = Vec::new();
    for j in 0..ncols {
        let forced = rng.random_range(0..nrows);
        for i in 0..nrows {
            if i == forced || rng.random_bool(density) {
                let v: f64 = rng.random_range(0.5..1.5);
                let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                trips.push((i, j, s * v));
            }
        }
    }
    SparseMat::from_triplets(nrows, ncols, &trips)
}
