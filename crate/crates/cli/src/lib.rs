//! `qnipm` command line: generate instances, solve them, verify traces, run sweeps.

// `!(a <= b)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use qnipm::checks::{complexity_fit, verify_trace};
use qnipm::io::{attach_full, full_sidecar_path, read_trace, write_trace, FullTrace, ProblemFile};
use qnipm::{
    cold_start, evaluate_f, generate_centered, generate_solved, mu, run as solve_lp, CoreError, IteratePoint, Problem,
    SolverOptions, Status, StepMode, TraceDetail, Variant,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_STEP_FAILURE: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "qnipm", version, about = "Quasi-Newton primal-dual interior point solver for linear programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random instance to a problem file.
    Generate(GenerateArgs),
    /// Solve a problem file and optionally write its trace.
    Solve(SolveArgs),
    /// Check a trace against the convergence analysis.
    Verify(VerifyArgs),
    /// Run a size sweep and fit the iteration growth exponent.
    Experiment(ExperimentArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Kind {
    Centered,
    Solved,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VariantArg {
    N2,
    Ns,
    NsInf,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::N2 => Variant::FeasibleN2,
            VariantArg::Ns => Variant::FeasibleNs,
            VariantArg::NsInf => Variant::InfeasibleNs,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Theory,
    Adaptive,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Duality measure of the central start (centered instances).
    #[arg(long, default_value_t = 1.0)]
    mu0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct SolverFlags {
    #[arg(long, value_enum, default_value = "n2")]
    variant: VariantArg,
    #[arg(long, value_enum, default_value = "adaptive")]
    mode: ModeArg,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    /// Centering parameter for ns and ns-inf (defaults to the midpoint of the range).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha_dec: Option<f64>,
    /// Convergence tolerance epsilon.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Quasi-Newton steps per Newton step; values above 1 are experimental.
    #[arg(long, default_value_t = 1)]
    qn_steps: usize,
    /// Allow one refinement pass on inaccurate KKT solves.
    #[arg(long)]
    refine: bool,
}

impl SolverFlags {
    fn options(&self) -> SolverOptions {
        let mut o = SolverOptions::new(
            self.variant.into(),
            match self.mode {
                ModeArg::Theory => StepMode::Theory,
                ModeArg::Adaptive => StepMode::Adaptive,
            },
        );
        if let Some(v) = self.theta {
            o.theta = v;
        }
        if let Some(v) = self.gamma {
            o.gamma = v;
        }
        if let Some(v) = self.beta {
            o.beta = v;
        }
        if let Some(v) = self.sigma_min {
            o.sigma_min = v;
        }
        if let Some(v) = self.sigma_max {
            o.sigma_max = v;
        }
        o.sigma = self.sigma;
        if let Some(v) = self.alpha_dec {
            o.alpha_dec = v;
        }
        if let Some(v) = self.tol {
            o.epsilon = v;
        }
        if let Some(v) = self.max_iters {
            o.max_iters = v;
        }
        o.qn_steps = self.qn_steps;
        o.refine = self.refine;
        o
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    flags: SolverFlags,
    /// Cold-start scale for ns-inf; defaults to the value stored in the problem file.
    #[arg(long)]
    xi: Option<f64>,
    /// Also write points and directions next to the trace.
    #[arg(long)]
    full_trace: bool,
    #[arg(long)]
    trace: Option<PathBuf>,
    problem: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    flags: SolverFlags,
    #[arg(long)]
    xi: Option<f64>,
    /// Full-trace sidecar; defaults to `<trace>.full.json` when that file exists.
    #[arg(long)]
    full: Option<PathBuf>,
    trace: PathBuf,
    problem: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[command(flatten)]
    flags: SolverFlags,
    /// Comma-separated problem sizes n.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Experiment(a) => cmd_experiment(&a),
    }
}

fn fail(code: i32, msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    code
}

fn cmd_generate(a: &GenerateArgs) -> i32 {
    if a.m == 0 || a.m >= a.n {
        return fail(EXIT_USAGE, format!("need 1 <= m < n, got m = {}, n = {}", a.m, a.n));
    }
    if !(a.mu0 > 0.0) || !a.mu0.is_finite() {
        return fail(EXIT_USAGE, format!("--mu0 must be positive, got {}", a.mu0));
    }
    let g = match a.kind {
        Kind::Centered => generate_centered(a.n, a.m, a.mu0, a.seed),
        Kind::Solved => generate_solved(a.n, a.m, a.seed),
    };
    let g = match g {
        Ok(g) => g,
        Err(e) => return fail(EXIT_FAILURE, e),
    };
    match ProblemFile::from_instance(&g).write(&a.output) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(EXIT_FAILURE, e),
    }
}

fn load_problem(path: &Path) -> Result<(ProblemFile, Problem), CoreError> {
    let file = ProblemFile::read(path)?;
    let problem = file.to_problem()?;
    Ok((file, problem))
}

/// Start point the variant uses for this problem file.
fn start_point(file: &ProblemFile, variant: Variant, xi: Option<f64>) -> Result<IteratePoint, String> {
    if variant.is_feasible() {
        file.central_start()
            .map_err(|e| e.to_string())?
            .ok_or_else(|| "problem file has no central_start; feasible variants need one".to_string())
    } else {
        let xi = xi.or(file.xi).ok_or("ns-inf needs --xi or a problem file that stores xi")?;
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(format!("xi must be positive, got {xi}"));
        }
        Ok(cold_start(file.n, file.m, xi))
    }
}

fn cmd_solve(a: &SolveArgs) -> i32 {
    if a.full_trace && a.trace.is_none() {
        return fail(EXIT_USAGE, "--full-trace needs --trace");
    }
    let (file, problem) = match load_problem(&a.problem) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let mut options = a.flags.options();
    if let Err(e) = options.validate(problem.n()) {
        return fail(EXIT_USAGE, e);
    }
    let start = match start_point(&file, options.variant, a.xi) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    options.trace = match (&a.trace, a.full_trace) {
        (None, _) => TraceDetail::Off,
        (Some(_), false) => TraceDetail::Summary,
        (Some(_), true) => TraceDetail::Full,
    };
    let out = match solve_lp(&problem, &start, &options) {
        Ok(o) => o,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    if let Some(path) = &a.trace {
        if let Err(e) = write_trace_files(path, a.full_trace, &problem, &out.trace) {
            return fail(EXIT_FAILURE, e);
        }
    }
    println!("status={} iters={} mu={:e}", out.status, out.iterations, out.mu);
    if let Some(f) = &out.failure {
        eprintln!("{f}");
    }
    match out.status {
        Status::Converged => EXIT_OK,
        Status::IterLimit => EXIT_FAILURE,
        Status::StepFailure => EXIT_STEP_FAILURE,
    }
}

fn write_trace_files(path: &Path, full: bool, problem: &Problem, trace: &[qnipm::StepRecord]) -> Result<(), CoreError> {
    let f = File::create(path).map_err(|e| CoreError::Io(format!("{}: {e}", path.display())))?;
    write_trace(BufWriter::new(f), trace)?;
    if full {
        let sidecar = FullTrace::from_records(problem.n(), problem.m(), trace)
            .ok_or_else(|| CoreError::Io("trace lacks step details".into()))?;
        sidecar.write(&full_sidecar_path(path))?;
    }
    Ok(())
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn cmd_verify(a: &VerifyArgs) -> i32 {
    let (file, problem) = match load_problem(&a.problem) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_USAGE, e),
    };
    let options = a.flags.options();
    if let Err(e) = options.validate(problem.n()) {
        return fail(EXIT_USAGE, e);
    }
    let mut trace = match File::open(&a.trace).map_err(CoreError::from).and_then(read_trace) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", a.trace.display())),
    };
    let sidecar = a.full.clone().or_else(|| Some(full_sidecar_path(&a.trace)).filter(|p| p.exists()));
    if let Some(path) = sidecar {
        let full = match FullTrace::read(&path) {
            Ok(f) => f,
            Err(e) => return fail(EXIT_USAGE, format!("{}: {e}", path.display())),
        };
        if let Err(e) = attach_full(&problem, &mut trace, &full) {
            return match e {
                CoreError::TraceMismatch(_) => fail(EXIT_MISMATCH, e),
                other => fail(EXIT_USAGE, other),
            };
        }
    }
    if let (Some(first), Ok(start)) = (trace.first(), start_point(&file, options.variant, a.xi)) {
        if let Err(why) = start_matches(&problem, &start, first) {
            return fail(EXIT_MISMATCH, format!("trace does not start from this problem's start point: {why}"));
        }
    }
    let report = verify_trace(&problem, &options, &trace);
    print!("{}", report.summary());
    if report.passed() {
        println!("verify: PASS ({} rows)", trace.len());
        EXIT_OK
    } else {
        let names: Vec<&str> = report.failed_checks().into_iter().collect();
        println!("verify: FAIL {}", names.join(","));
        EXIT_FAILURE
    }
}

fn start_matches(problem: &Problem, start: &IteratePoint, first: &qnipm::StepRecord) -> Result<(), String> {
    let r = evaluate_f(problem, start).map_err(|e| e.to_string())?;
    let mu0 = mu(start).map_err(|e| e.to_string())?;
    if relative_gap(mu0, first.mu_before) > 1e-12 {
        return Err(format!("mu0 = {mu0:e}, first row has {:e}", first.mu_before));
    }
    let scale = 1e-12 * (1.0 + r.norm_r());
    if (r.norm_rb() - first.norm_rb).abs() > scale || (r.norm_rc() - first.norm_rc).abs() > scale {
        return Err(format!(
            "start residuals ({:e}, {:e}), first row has ({:e}, {:e})",
            r.norm_rb(),
            r.norm_rc(),
            first.norm_rb,
            first.norm_rc
        ));
    }
    if let Some(d) = &first.detail {
        if (&d.point.stacked() - start.stacked()).amax() > 1e-12 * (1.0 + start.stacked().amax()) {
            return Err("first stored point differs from the start point".into());
        }
    }
    Ok(())
}

/// One solver run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub iterations: usize,
    pub status: Status,
}

/// Seed of repetition `rep` at size `n`.
pub fn sweep_seed(base: u64, n: usize, rep: usize) -> u64 {
    base.wrapping_add(1_000_003u64.wrapping_mul(n as u64)).wrapping_add(rep as u64)
}

/// Runs `reps` instances per size; rows come back in `(size, rep)` order.
pub fn sweep(options: &SolverOptions, sizes: &[usize], reps: usize, seed: u64) -> Result<Vec<SweepRow>, CoreError> {
    let jobs: Vec<(usize, usize)> = sizes.iter().flat_map(|&n| (0..reps).map(move |r| (n, r))).collect();
    let mut options = options.clone();
    options.trace = TraceDetail::Off;
    jobs.par_iter()
        .map(|&(n, rep)| {
            let s = sweep_seed(seed, n, rep);
            let m = (n / 2).max(1);
            let (problem, start) = if options.variant.is_feasible() {
                let g = generate_centered(n, m, 1.0, s)?;
                let start = g.central_start.expect("centred instances carry a start");
                (g.problem, start)
            } else {
                let g = generate_solved(n, m, s)?;
                let start = cold_start(n, m, g.xi.expect("solved instances carry xi"));
                (g.problem, start)
            };
            let out = solve_lp(&problem, &start, &options)?;
            Ok(SweepRow { n, rep, seed: s, iterations: out.iterations, status: out.status })
        })
        .collect()
}

fn cmd_experiment(a: &ExperimentArgs) -> i32 {
    let mut distinct = a.sizes.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return fail(EXIT_USAGE, format!("--sizes needs at least 3 distinct values, got {}", distinct.len()));
    }
    if a.reps == 0 {
        return fail(EXIT_USAGE, "--reps must be at least 1");
    }
    if let Some(&bad) = a.sizes.iter().find(|&&n| n < 2) {
        return fail(EXIT_USAGE, format!("sizes must be at least 2, got {bad}"));
    }
    let options = a.flags.options();
    for &n in &distinct {
        if let Err(e) = options.validate(n) {
            return fail(EXIT_USAGE, e);
        }
    }
    let rows = match sweep(&options, &a.sizes, a.reps, a.seed) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_FAILURE, e),
    };
    if let Err(e) = write_sweep(&a.output, &rows) {
        return fail(EXIT_FAILURE, e);
    }
    let samples: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.status == Status::Converged && r.iterations > 0)
        .map(|r| (r.n, r.iterations as f64))
        .collect();
    let all_converged = rows.iter().all(|r| r.status == Status::Converged);
    match complexity_fit(&samples) {
        Ok(fit) => {
            println!("exponent={:.6} r_squared={:.6} runs={}", fit.exponent, fit.r_squared, rows.len());
            if all_converged {
                EXIT_OK
            } else {
                fail(EXIT_FAILURE, "some runs did not converge; they are excluded from the fit")
            }
        }
        Err(e) => {
            let missed = rows.len() - samples.len();
            fail(EXIT_FAILURE, format!("no fit: {e} ({missed} of {} runs did not converge)", rows.len()))
        }
    }
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "n,rep,seed,iterations,converged,status")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.n, r.rep, r.seed, r.iterations, r.status == Status::Converged, r.status)?;
    }
    w.flush()
}
