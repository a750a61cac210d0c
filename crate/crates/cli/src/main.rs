//! `meta-equiv`: optimal combination of two estimators under trace-AMSE
//! risk, with verification that the optimum transports correctly across
//! affine reparameterisations of the weights.
//!
//! Subcommands: `gen`, `solve`, `verify`, `sweep`, `grad-check`. Payload
//! output (JSON or CSV) goes to stdout or `--out`; diagnostics go to
//! stderr. `META_EQUIV_THREADS` caps `verify` parallelism.

mod error;
mod problem;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use meta_equiv_core::harness::grad_check_max_rel_err;
use meta_equiv_core::matrix::random_normal;
use meta_equiv_core::risk::{fd_gradient_default, gradient};
use meta_equiv_core::{
    chart_risk, run_sweep, run_verification, run_verification_on, solve_closed_form,
    solve_iterative, Chart, RiskSpec, SolveMethod, SolveResult, Thresholds, VerificationReport,
    WeightMatrix,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use error::{CliError, EXIT_FAIL};
use problem::ProblemFile;

const GRAD_CHECK_THRESHOLD: f64 = 1e-5;

#[derive(Parser)]
#[command(
    name = "meta-equiv",
    version,
    about = "Optimal two-estimator combination under trace-AMSE risk, \
             with reparameterisation-invariance verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random problem file with a valid joint covariance
    Gen(GenArgs),
    /// Solve one problem in a chosen parameterisation
    Solve(SolveArgs),
    /// Run paired verifications over many seeds and write a CSV report
    Verify(VerifyArgs),
    /// Sweep the scalar risk slice W = wI and its mirrored counterpart
    Sweep(SweepArgs),
    /// Compare the analytic gradient against central differences
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Parameter dimension K
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path for the problem JSON
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Closed,
    Iterative,
}

impl SolverArg {
    fn method(self) -> SolveMethod {
        match self {
            SolverArg::Closed => SolveMethod::ClosedForm,
            SolverArg::Iterative => SolveMethod::Iterative,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Problem JSON path
    #[arg(long)]
    problem: PathBuf,
    /// Parameterisation: A weights the second estimator, B the first
    #[arg(long, value_enum)]
    form: FormArg,
    /// Solution route
    #[arg(long, value_enum, default_value = "closed")]
    solver: SolverArg,
    /// Gradient-norm tolerance for the iterative solver
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Iteration budget for the iterative solver
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Parameter dimension K for generated instances
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    /// Number of seeds (0, 1, .., N-1)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: u64,
    /// Solution route
    #[arg(long, value_enum, default_value = "iterative")]
    solver: SolverArg,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Verify this problem file instead of generated instances
    #[arg(long)]
    problem: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Problem JSON path
    #[arg(long)]
    problem: PathBuf,
    /// Lower grid bound
    #[arg(long, default_value_t = 0.0)]
    min: f64,
    /// Upper grid bound
    #[arg(long, default_value_t = 1.0)]
    max: f64,
    /// Number of grid points
    #[arg(long, default_value_t = 1001, value_parser = clap::value_parser!(u64).range(2..))]
    points: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradCheckArgs {
    /// Problem JSON path
    #[arg(long)]
    problem: PathBuf,
    /// Number of random evaluation points
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Flip the analytic gradient sign before comparing (self-test that
    /// the gate catches a corrupted gradient)
    #[arg(long, hide = true)]
    flip_gradient: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::GradCheck(args) => cmd_grad_check(args),
    }
}

fn emit<T: Serialize>(payload: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(payload)
        .map_err(|e| CliError::runtime(format!("serialising output: {e}")))?;
    println!("{text}");
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode, CliError> {
    let dim = args.dim as usize;
    let file = ProblemFile::generate(dim, args.seed);
    // construction guarantees validity; fail loudly if that ever breaks
    file.to_risk_spec()?;
    file.save(&args.out)?;
    eprintln!(
        "wrote problem (dim {dim}, seed {}) to {}",
        args.seed,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SolveOutput {
    form: String,
    method: String,
    dim: usize,
    w_opt: Vec<Vec<f64>>,
    risk: f64,
    grad_norm: f64,
    iterations: usize,
}

fn solve_in_chart(
    spec: &RiskSpec,
    chart: &Chart,
    method: SolveMethod,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult, CliError> {
    match method {
        SolveMethod::ClosedForm => Ok(solve_closed_form(spec, chart)?),
        SolveMethod::Iterative => {
            let evaluator = chart_risk(spec, chart)?;
            Ok(solve_iterative(
                &evaluator,
                &WeightMatrix::zeros(spec.dim()),
                tol,
                max_iter,
            )?)
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, CliError> {
    let spec = ProblemFile::load(&args.problem)?.to_risk_spec()?;
    let chart = match args.form {
        FormArg::A => Chart::FormA,
        FormArg::B => Chart::FormB,
    };
    let result = solve_in_chart(&spec, &chart, args.solver.method(), args.tol, args.max_iter)?;
    emit(&SolveOutput {
        form: chart.label().to_string(),
        method: result.method.label().to_string(),
        dim: spec.dim(),
        w_opt: result.w_opt.as_matrix().to_nested(),
        risk: result.risk_at_opt,
        grad_norm: result.grad_norm_at_opt,
        iterations: result.iterations,
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct VerifySummary {
    seeds: u64,
    dim: usize,
    method: String,
    max_weight_covariance_residual: f64,
    max_estimator_gap: f64,
    max_risk_gap: f64,
    max_grad_check_rel_err: f64,
    min_hessian_min_eig: f64,
    all_pass: bool,
    csv: String,
}

fn build_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var("META_EQUIV_THREADS") {
        match value.parse::<usize>() {
            Ok(n) if n >= 1 => builder = builder.num_threads(n),
            _ => eprintln!("warning: ignoring invalid META_EQUIV_THREADS={value}"),
        }
    }
    builder
        .build()
        .map_err(|e| CliError::runtime(format!("building thread pool: {e}")))
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, CliError> {
    let method = args.solver.method();
    let thresholds = Thresholds::for_method(method);
    let injected = args
        .problem
        .as_deref()
        .map(|p| ProblemFile::load(p).and_then(|f| f.to_risk_spec()))
        .transpose()?;

    let pool = build_pool()?;
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let mut reports: Vec<VerificationReport> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| match &injected {
                Some(spec) => run_verification_on(spec, seed, method, &thresholds),
                None => run_verification(args.dim as usize, seed, method, &thresholds),
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    reports.sort_by_key(|r| r.seed);

    let mut csv = String::from(VerificationReport::CSV_HEADER);
    csv.push('\n');
    for report in &reports {
        csv.push_str(&report.csv_row());
        csv.push('\n');
    }
    fs::write(&args.out, csv)?;

    let fold = |f: fn(&VerificationReport) -> f64, init: f64, pick_max: bool| {
        reports.iter().map(f).fold(init, |acc, v| {
            if pick_max {
                acc.max(v)
            } else {
                acc.min(v)
            }
        })
    };
    let all_pass = reports.iter().all(|r| r.pass);
    emit(&VerifySummary {
        seeds: args.seeds,
        dim: reports.first().map_or(args.dim as usize, |r| r.dim),
        method: method.label().to_string(),
        max_weight_covariance_residual: fold(|r| r.weight_covariance_residual, 0.0, true),
        max_estimator_gap: fold(|r| r.estimator_gap, 0.0, true),
        max_risk_gap: fold(|r| r.risk_gap, 0.0, true),
        max_grad_check_rel_err: fold(|r| r.grad_check_rel_err, 0.0, true),
        min_hessian_min_eig: fold(|r| r.hessian_min_eig, f64::INFINITY, false),
        all_pass,
        csv: args.out.display().to_string(),
    })?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    })
}

#[derive(Serialize)]
struct SweepSummary {
    points: u64,
    grid_min: f64,
    grid_max: f64,
    argmin_f: f64,
    argmin_g: f64,
    max_mirror_residual: f64,
    mirror_ok: bool,
    csv: String,
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode, CliError> {
    let spec = ProblemFile::load(&args.problem)?.to_risk_spec()?;
    let sweep = run_sweep(&spec, args.min, args.max, args.points as usize)?;

    let mut csv = String::from("w,f,g\n");
    for i in 0..sweep.grid.len() {
        csv.push_str(&format!(
            "{},{},{}\n",
            sweep.grid[i], sweep.f_values[i], sweep.g_values[i]
        ));
    }
    fs::write(&args.out, csv)?;

    let mirror_ok = sweep.max_mirror_residual <= 1e-10 * (1.0 + sweep.max_abs_f);
    emit(&SweepSummary {
        points: args.points,
        grid_min: args.min,
        grid_max: args.max,
        argmin_f: sweep.argmin_f,
        argmin_g: sweep.argmin_g,
        max_mirror_residual: sweep.max_mirror_residual,
        mirror_ok,
        csv: args.out.display().to_string(),
    })?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct GradCheckOutput {
    trials: u64,
    max_rel_err: f64,
    threshold: f64,
    pass: bool,
}

fn cmd_grad_check(args: GradCheckArgs) -> Result<ExitCode, CliError> {
    let file = ProblemFile::load(&args.problem)?;
    let spec = file.to_risk_spec()?;
    let seed = file.seed();

    let max_rel_err = if args.flip_gradient {
        // same draws as the library gate, corrupted analytic side
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let k = spec.dim();
        let mut worst = 0.0f64;
        for _ in 0..args.trials {
            let w = WeightMatrix::new(random_normal(k, k, &mut rng))?;
            let analytic = gradient(&spec, &w)?.scale(-1.0);
            let fd = fd_gradient_default(&spec, &w)?;
            let rel =
                analytic.sub(&fd)?.frobenius_norm() / (1.0 + analytic.frobenius_norm());
            worst = worst.max(rel);
        }
        worst
    } else {
        grad_check_max_rel_err(&spec, seed, args.trials as usize)?
    };

    let pass = max_rel_err <= GRAD_CHECK_THRESHOLD;
    emit(&GradCheckOutput {
        trials: args.trials,
        max_rel_err,
        threshold: GRAD_CHECK_THRESHOLD,
        pass,
    })?;
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    })
}
