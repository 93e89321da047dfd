//! `dae-stab` command line: `gen`, `reduce`, `stabilize`, `analyze`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::descriptor::{
    gen_synthetic, load_system, oracle_cap, write_system, ORACLE_CAP_ENV,
};
use crate::error::{Error, Result};
use crate::eval::{
    interp_residuals, sigma_sweep_feedback, step_response, DEFAULT_OMEGA_MAX, DEFAULT_OMEGA_MIN,
    DEFAULT_POINTS,
};
use crate::irka::{
    irka_run_with, Feedthrough, IrkaOptions, IrkaReport, ReducedModel, ShiftStrategy, DEFAULT_IMAX,
    DEFAULT_TOL,
};
use crate::linalg::{spectral_abscissa, DenseMat};
use crate::stabilize::{stabilize_pipeline_with, LiftBasis, PipelineConfig, SpectrumReport};

pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_MODEL: i32 = 4;
pub const EXIT_SINGULAR: i32 = 5;
pub const EXIT_CAP: i32 = 6;
pub const EXIT_MATRIX_EQ: i32 = 7;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingFile { .. } | Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        Error::DimensionMismatch(_)
        | Error::SingularJ4 { .. }
        | Error::SingularE1 { .. }
        | Error::Infeasible(_)
        | Error::InvalidShifts(_) => EXIT_MODEL,
        Error::SingularMatrix { .. } | Error::SingularPencil { .. } | Error::SingularAtShift { .. } => {
            EXIT_SINGULAR
        }
        Error::OracleCapExceeded { .. } => EXIT_CAP,
        Error::UnsolvableLyapunov { .. }
        | Error::NoStabilizingSolution(_)
        | Error::ConvergenceFailure(_)
        | Error::Unstabilizable { .. }
        | Error::ImaginaryAxisEigenvalue { .. } => EXIT_MATRIX_EQ,
    }
}

#[derive(Parser, Debug)]
#[command(name = "dae-stab", version, about = "Riccati feedback stabilization of index-1 descriptor systems")]
pub struct Cli {
    /// Largest order for dense verification; overrides DAE_STAB_ORACLE_CAP.
    #[arg(long, global = true)]
    pub oracle_cap: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a random index-1 model with planted unstable eigenvalues.
    Gen(GenArgs),
    /// Reduce a model with tangential IRKA.
    Reduce(ReduceArgs),
    /// Compute and verify a stabilizing feedback.
    Stabilize(StabilizeArgs),
    /// Sigma sweep and step response of a model against a reduced model.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long)]
    pub n1: usize,
    #[arg(long)]
    pub n2: usize,
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub unstable: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct IrkaArgs {
    /// Model directory or manifest path.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_IMAX)]
    pub imax: usize,
    #[arg(long, value_enum, default_value_t = ShiftStrategy::LogSpaced)]
    pub strategy: ShiftStrategy,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Feedthrough::Schur)]
    pub feedthrough: Feedthrough,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[command(flatten)]
    pub irka: IrkaArgs,
}

#[derive(Args, Debug)]
pub struct StabilizeArgs {
    #[command(flatten)]
    pub irka: IrkaArgs,
    /// Skip the dense spectrum checks (and the Bernoulli initial feedback).
    #[arg(long)]
    pub no_verify: bool,
    /// Printed formulas: original-block reduced model, `V` lift, `K°` alone.
    #[arg(long)]
    pub verbatim: bool,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory written by `reduce` or `stabilize`.
    #[arg(long)]
    pub rom: PathBuf,
    /// Feedback CSV (p × n1) applied in the step response.
    #[arg(long)]
    pub feedback: Option<PathBuf>,
    /// Initial feedback CSV; the sweep then compares against the shifted
    /// full model, as for the reduced model written by `stabilize`.
    #[arg(long)]
    pub k0: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_OMEGA_MIN)]
    pub omega_min: f64,
    #[arg(long, default_value_t = DEFAULT_OMEGA_MAX)]
    pub omega_max: f64,
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    pub points: usize,
    /// Also write a step response.
    #[arg(long)]
    pub step: bool,
    /// Input channel for the step, counted from 1.
    #[arg(long, default_value_t = 1)]
    pub input: usize,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Resolved settings recorded in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub r: usize,
    pub tol: f64,
    pub imax: usize,
    pub strategy: ShiftStrategy,
    pub seed: u64,
    pub feedthrough: Feedthrough,
    pub oracle_cap: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub out: PathBuf,
}

impl RunConfig {
    fn from_irka(a: &IrkaArgs) -> Self {
        RunConfig {
            r: a.r,
            tol: a.tol,
            imax: a.imax,
            strategy: a.strategy,
            seed: a.seed,
            feedthrough: a.feedthrough,
            oracle_cap: oracle_cap(),
            omega_min: DEFAULT_OMEGA_MIN,
            omega_max: DEFAULT_OMEGA_MAX,
            points: DEFAULT_POINTS,
            out: a.out.clone(),
        }
    }

    fn irka_options(&self) -> IrkaOptions {
        let mut o = IrkaOptions::new(self.r);
        o.tol = self.tol;
        o.imax = self.imax;
        o.strategy = self.strategy;
        o.seed = self.seed;
        o.rom.feedthrough = self.feedthrough;
        o
    }
}

// ---------- CSV and JSON ----------

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// One header row `c0,c1,...`, then one row per matrix row.
pub fn write_matrix_csv(path: &Path, m: &DenseMat) -> Result<()> {
    let mut w = csv_writer(path)?;
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMat> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let ncols = r.headers().map_err(|e| csv_error(path, e))?.len();
    let mut data = Vec::new();
    let mut nrows = 0;
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() != ncols {
            return Err(Error::parse(path, k + 2, format!("{} fields, expected {ncols}", rec.len())));
        }
        for f in rec.iter() {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, k + 2, format!("not a number: {f:?}")))?;
            data.push(v);
        }
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &data))
}

fn write_table(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        let rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_spectrum(path: &Path, eig: &[Complex64]) -> Result<()> {
    write_table(path, &["real", "imag"], eig.iter().map(|z| vec![z.re, z.im]))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub const ROM_FILES: [&str; 5] = ["rom_e.csv", "rom_a.csv", "rom_b.csv", "rom_c.csv", "rom_d.csv"];

pub fn write_rom(dir: &Path, rom: &ReducedModel) -> Result<()> {
    for (name, m) in ROM_FILES.iter().zip([&rom.e, &rom.a, &rom.b, &rom.c, &rom.d]) {
        write_matrix_csv(&dir.join(name), m)?;
    }
    Ok(())
}

pub fn read_rom(dir: &Path) -> Result<ReducedModel> {
    let m: Vec<DenseMat> = ROM_FILES
        .iter()
        .map(|n| read_matrix_csv(&dir.join(n)))
        .collect::<Result<_>>()?;
    let [e, a, b, c, d]: [DenseMat; 5] = m.try_into().expect("five matrices");
    let r = a.nrows();
    if e.shape() != (r, r) || a.ncols() != r || b.nrows() != r || c.ncols() != r || d.shape() != (c.nrows(), b.ncols()) {
        return Err(Error::dims(format!(
            "reduced model in {} has inconsistent shapes",
            dir.display()
        )));
    }
    Ok(ReducedModel { e, a, b, c, d })
}

#[derive(Serialize)]
struct IrkaJson<'a> {
    config: &'a RunConfig,
    iterations: usize,
    converged: bool,
    order: usize,
    dropped_columns: usize,
    shift_history: &'a [f64],
    final_shifts: Vec<[f64; 2]>,
}

fn irka_json<'a>(cfg: &'a RunConfig, rep: &'a IrkaReport, dropped: usize) -> IrkaJson<'a> {
    IrkaJson {
        config: cfg,
        iterations: rep.iterations,
        converged: rep.converged,
        order: rep.order,
        dropped_columns: dropped,
        shift_history: &rep.shift_history,
        final_shifts: rep.final_shifts.alphas.iter().map(|z| [z.re, z.im]).collect(),
    }
}

// ---------- commands ----------

pub fn cmd_gen(a: &GenArgs) -> Result<i32> {
    let sys = gen_synthetic(a.n1, a.n2, a.p, a.m, a.unstable, a.seed)?;
    create_dir(&a.out)?;
    let manifest = write_system(&sys, &a.out)?;
    println!("wrote {} ({} planted unstable eigenvalues)", manifest.display(), a.unstable);
    Ok(0)
}

pub fn cmd_reduce(a: &ReduceArgs) -> Result<i32> {
    let cfg = RunConfig::from_irka(&a.irka);
    let sys = load_system(&a.irka.model)?;
    let (rom, proj, rep) = irka_run_with(&sys, None, &cfg.irka_options())?;
    create_dir(&cfg.out)?;
    write_rom(&cfg.out, &rom)?;
    write_matrix_csv(&cfg.out.join("v.csv"), &proj.v)?;
    write_matrix_csv(&cfg.out.join("w.csv"), &proj.w)?;
    let res = interp_residuals(&sys, &rom, &proj.shifts, None)?;
    write_table(
        &cfg.out.join("interp_residuals.csv"),
        &["alpha_re", "alpha_im", "right", "left", "bitangential"],
        res.iter().zip(&proj.shifts.alphas).map(|(r, a)| match r {
            Ok(r) => vec![a.re, a.im, r.right, r.left, r.bitangential],
            Err(_) => vec![a.re, a.im, f64::NAN, f64::NAN, f64::NAN],
        }),
    )?;
    write_json(&cfg.out.join("irka_report.json"), &irka_json(&cfg, &rep, proj.dropped))?;
    println!(
        "order {} after {} iterations (converged: {})",
        rep.order, rep.iterations, rep.converged
    );
    Ok(0)
}

#[derive(Serialize)]
struct StabilizeJson<'a> {
    config: &'a RunConfig,
    verbatim: bool,
    lift: LiftBasis,
    verified: bool,
    verification_passed: Option<bool>,
    abscissa_before: Option<f64>,
    abscissa_after: Option<f64>,
    unstable_before: Option<usize>,
    unstable_after: Option<usize>,
    reduced_closed_loop_abscissa: f64,
    care_residual: f64,
    irka: IrkaJson<'a>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn cmd_stabilize(a: &StabilizeArgs) -> Result<i32> {
    let cfg = RunConfig::from_irka(&a.irka);
    let sys = load_system(&a.irka.model)?;
    let mut pc = if a.verbatim { PipelineConfig::verbatim(cfg.r) } else { PipelineConfig::new(cfg.r) };
    let rom_opts = pc.irka.rom;
    pc.irka = cfg.irka_options();
    pc.irka.rom.project_shifted = rom_opts.project_shifted;
    pc.verify = !a.no_verify;
    let out = stabilize_pipeline_with(&sys, &pc)?;

    create_dir(&cfg.out)?;
    let f = &out.feedback;
    write_matrix_csv(&cfg.out.join("k0.csv"), &f.k0)?;
    write_matrix_csv(&cfg.out.join("k_hat.csv"), &f.k_hat)?;
    write_matrix_csv(&cfg.out.join("k_opt.csv"), &f.k_opt)?;
    write_matrix_csv(&cfg.out.join("k_applied.csv"), &f.k_applied)?;
    write_rom(&cfg.out, &out.rom)?;
    write_spectrum(&cfg.out.join("spectrum_before.csv"), &out.before.eigenvalues)?;
    write_spectrum(&cfg.out.join("spectrum_after.csv"), &out.after.eigenvalues)?;

    let verified = out.after.verified;
    let passed = verified.then(|| out.after.abscissa < 0.0);
    let opt = |r: &SpectrumReport| (finite(r.abscissa), r.verified.then_some(r.unstable_count));
    let (ab, ub) = opt(&out.before);
    let (aa, ua) = opt(&out.after);
    let summary = StabilizeJson {
        config: &cfg,
        verbatim: a.verbatim,
        lift: pc.lift,
        verified,
        verification_passed: passed,
        abscissa_before: ab,
        abscissa_after: aa,
        unstable_before: ub,
        unstable_after: ua,
        reduced_closed_loop_abscissa: spectral_abscissa(&out.care.closed_loop_eigenvalues),
        care_residual: out.care.residual_norm,
        irka: irka_json(&cfg, &out.irka, out.projectors.dropped),
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    match passed {
        Some(true) => {
            println!("closed-loop abscissa {:.6e}", out.after.abscissa);
            Ok(0)
        }
        Some(false) => {
            eprintln!(
                "verification failed: closed-loop abscissa {:.6e} with {} unstable eigenvalues",
                out.after.abscissa, out.after.unstable_count
            );
            Ok(EXIT_VERIFY)
        }
        None => {
            println!("verification skipped");
            Ok(0)
        }
    }
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<i32> {
    let sys = load_system(&a.model)?;
    let rom = read_rom(&a.rom)?;
    create_dir(&a.out)?;
    let k0 = a.k0.as_deref().map(read_matrix_csv).transpose()?;
    let fr = sigma_sweep_feedback(&sys, &rom, k0.as_ref(), a.omega_min, a.omega_max, a.points)?;
    write_table(
        &a.out.join("sigma.csv"),
        &["omega", "sigma_full", "sigma_rom", "abs_err", "rel_err"],
        (0..fr.len()).map(|i| vec![fr.omegas[i], fr.sigma_full[i], fr.sigma_rom[i], fr.abs_err[i], fr.rel_err[i]]),
    )?;
    println!("max relative error {:.3e} over {} points", fr.max_rel_err(), fr.len());
    if a.step {
        if a.input == 0 || a.input > sys.p() {
            return Err(Error::dims(format!("--input {} but the model has {} inputs", a.input, sys.p())));
        }
        let k = a.feedback.as_deref().map(read_matrix_csv).transpose()?;
        let st = step_response(&sys, k.as_ref(), a.input - 1, a.t_end, a.dt)?;
        let mut header = vec!["time".to_string()];
        header.extend((1..=sys.m()).map(|i| format!("y_{i}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_table(
            &a.out.join(format!("step_u{}.csv", a.input)),
            &header,
            (0..st.times.len()).map(|i| {
                let mut row = vec![st.times[i]];
                row.extend(st.outputs.row(i).iter());
                row
            }),
        )?;
    }
    Ok(0)
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Stabilize(a) => cmd_stabilize(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(cap) = cli.oracle_cap {
        std::env::set_var(ORACLE_CAP_ENV, cap.to_string());
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
