//! `rankpert` command-line driver.
//!
//! Exit codes: 0 success, 1 property violation or I/O failure, 2 quadrature
//! non-convergence, 64 usage error, 65 malformed input data.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rankpert::contour::{lemma_sweep, CheckKind, QuadratureSpec, SweepOptions};
use rankpert::experiments::{
    parallel_campaign, run_bound_campaign, run_fig1, run_fixed_campaign, run_sharpness, CampaignConfig, Fig1Spec,
    GroundSpec,
};
use rankpert::noise::NoiseSpec;
use rankpert::{DenseMatrix, Error};

use manifest::Recorder;

const EXIT_VIOLATION: u8 = 1;
const EXIT_QUADRATURE: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

const POLE_SET: [f64; 7] = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 5.0];

#[derive(Parser, Debug)]
#[command(name = "rankpert", version, about = "Perturbation bounds for best low-rank approximations")]
struct Cli {
    /// Master seed; falls back to the SEED environment variable.
    #[arg(long, env = "SEED", global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check scalar contour integrals against closed forms and bounds.
    VerifyLemmas(VerifyArgs),
    /// Evaluate every bound on seeded perturbations of one ground matrix.
    Bounds(BoundsArgs),
    /// Run one of the bundled experiments.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// Quadrature tolerance; exact identities are matched within max(1e-8, 10 tol).
    #[arg(long, default_value_t = 1e-11)]
    tol: f64,
    /// Number of poles drawn from {-3, -2, -1, 1, 2, 3, 5}, in that order.
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u8).range(1..=7))]
    sweep_size: u8,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(group(clap::ArgGroup::new("ground").required(true).args(["matrix", "generate"])))]
struct BoundsArgs {
    /// Ground matrix as headerless CSV.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Ground-matrix generator spec (JSON).
    #[arg(long)]
    generate: Option<PathBuf>,
    /// Noise spec (JSON); its seed is replaced per trial.
    #[arg(long)]
    noise: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    /// Rank of the ground matrix (default: numerical rank, or the generator's spectrum length).
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Deviation level of the random-noise bound (default: from a 1% failure target).
    #[arg(long)]
    t1: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// Rank-3 missing-entry demo: four PGM panels and a report.
    Fig1(Fig1Args),
    /// Rank-one spike against Rademacher noise: top singular value shifts.
    Sharpness(SharpnessArgs),
    /// Cosine between the truncation residuals before and after perturbation.
    Parallel(ParallelArgs),
}

#[derive(Args, Debug, Serialize)]
struct Fig1Args {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SharpnessArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Spike strength: sigma_1 = c sqrt(n), c > 2.
    #[arg(long, default_value_t = 4.0)]
    c: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ParallelArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
}

/// A failed run: exit code and message.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::QuadratureFail { .. } => EXIT_QUADRATURE,
            Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => EXIT_DATA,
            Error::InvalidSpec(_) | Error::InvalidDensity(_) | Error::Index(_) => EXIT_USAGE,
            _ => EXIT_VIOLATION,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(EXIT_VIOLATION, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    // faer's own parallel kernels may reorder floating-point sums; keep them
    // sequential so results do not depend on --jobs.
    faer::set_global_parallelism(faer::Par::Seq);
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j as usize).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VIOLATION);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::VerifyLemmas(a) => run_recorded(&a.out, "verify-lemmas", a, cli.seed.unwrap_or(0), |rec| {
            verify_lemmas(a, rec)
        }),
        Command::Bounds(a) => run_recorded(&a.out, "bounds", a, cli.seed.unwrap_or(0), |rec| {
            bounds(a, cli.seed.unwrap_or(0), rec)
        }),
        Command::Experiment(Experiment::Fig1(a)) => {
            let seed = cli.seed.unwrap_or(Fig1Spec::default().seed);
            run_recorded(&a.out, "experiment fig1", a, seed, |rec| fig1(a, seed, rec))
        }
        Command::Experiment(Experiment::Sharpness(a)) => {
            let seed = cli.seed.unwrap_or(0);
            run_recorded(&a.out, "experiment sharpness", a, seed, |rec| sharpness(a, seed, rec))
        }
        Command::Experiment(Experiment::Parallel(a)) => {
            let seed = cli.seed.unwrap_or(0);
            run_recorded(&a.out, "experiment parallel", a, seed, |rec| parallel(a, seed, rec))
        }
    }
}

/// Runs `body` and writes the manifest whatever the outcome.
fn run_recorded<A: Serialize>(
    out: &Path,
    command: &str,
    args: &A,
    seed: u64,
    body: impl FnOnce(&mut Recorder) -> Outcome,
) -> Outcome {
    let config = serde_json::to_value(args).map_err(|e| Failure::new(EXIT_VIOLATION, e.to_string()))?;
    let mut rec = Recorder::new(out, command, config, seed)?;
    let result = body(&mut rec);
    let (code, message) = match &result {
        Ok(()) => (0, None),
        Err(f) => (f.code as i32, Some(f.message.clone())),
    };
    rec.finish(code, message)?;
    result
}

#[derive(Serialize)]
struct LemmaSummary {
    pole_set: Vec<f64>,
    quadrature_tol: f64,
    match_tol: f64,
    configurations: usize,
    checks: usize,
    exact: usize,
    reciprocal_bound: usize,
    linear_simple: usize,
    linear_bound: usize,
    violations: usize,
    quadrature_failures: usize,
    passed: bool,
}

fn verify_lemmas(a: &VerifyArgs, rec: &mut Recorder) -> Outcome {
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(Failure::new(EXIT_USAGE, format!("--tol {} must be positive", a.tol)));
    }
    let opts = SweepOptions {
        pole_set: POLE_SET[..a.sweep_size as usize].to_vec(),
        quadrature: QuadratureSpec::with_tol(a.tol),
        match_tol: (10.0 * a.tol).max(1e-8),
        ..SweepOptions::default()
    };
    let report = lemma_sweep(&opts)?;
    let summary = LemmaSummary {
        pole_set: opts.pole_set.clone(),
        quadrature_tol: a.tol,
        match_tol: opts.match_tol,
        configurations: report.configurations,
        checks: report.checks.len(),
        exact: report.count(CheckKind::Exact),
        reciprocal_bound: report.count(CheckKind::ReciprocalBound),
        linear_simple: report.count(CheckKind::LinearSimple),
        linear_bound: report.count(CheckKind::LinearBound),
        violations: report.violations().count(),
        quadrature_failures: report.quadrature_failures.len(),
        passed: report.passed(),
    };
    let mut lines = Vec::new();
    for c in &report.checks {
        serde_json::to_writer(&mut lines, c).map_err(Error::from)?;
        lines.push(b'\n');
    }
    rec.write("checks.jsonl", &lines)?;
    rec.write_json("quadrature_failures.json", &report.quadrature_failures)?;
    rec.write_json("summary.json", &summary)?;
    println!(
        "{} configurations, {} checks, {} violations, {} quadrature failures",
        summary.configurations, summary.checks, summary.violations, summary.quadrature_failures
    );
    report.ensure_clean().map_err(Failure::from)
}

fn read_json_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn bounds(a: &BoundsArgs, seed: u64, rec: &mut Recorder) -> Outcome {
    let noise = NoiseSpec::from_json(&read_json_file(&a.noise)?)?;
    let mut cfg = CampaignConfig {
        ground: None,
        noise,
        p: a.p as usize,
        r: a.r,
        trials: a.trials as usize,
        seed,
        t1: a.t1,
        failure_target: 0.01,
        structure: None,
    };
    let result = match (&a.matrix, &a.generate) {
        (Some(path), None) => {
            let m = DenseMatrix::read_csv_file(path).map_err(|e| {
                let f = Failure::from(e);
                Failure::new(f.code, format!("{}: {}", path.display(), f.message))
            })?;
            run_fixed_campaign(&m, &cfg)?
        }
        (None, Some(path)) => {
            let ground: GroundSpec = serde_json::from_str(&read_json_file(path)?).map_err(Error::from)?;
            cfg.ground = Some(ground);
            run_bound_campaign(&cfg)?
        }
        _ => return Err(Failure::new(EXIT_USAGE, "give exactly one of --matrix or --generate")),
    };
    let mut csv = Vec::new();
    rankpert::bounds::write_reports_csv(&result.reports, &mut csv)?;
    rec.write("reports.csv", &csv)?;
    rec.write_json("summary.json", &result)?;
    let s = &result.summary;
    println!(
        "{} of {} trials completed; {} main-gated, {} violations",
        s.completed,
        s.trials,
        s.general_gated,
        s.violation_messages.len()
    );
    if let Some(v) = s.violation_messages.first() {
        return Err(Failure::new(EXIT_VIOLATION, v.clone()));
    }
    if let Some(e) = result.errors.first() {
        return Err(Failure::new(EXIT_VIOLATION, format!("trial {}: {}", e.trial, e.message)));
    }
    Ok(())
}

fn fig1(a: &Fig1Args, seed: u64, rec: &mut Recorder) -> Outcome {
    let spec = Fig1Spec {
        n: a.n,
        rho: a.rho,
        seed,
        ..Fig1Spec::default()
    };
    let res = run_fig1(&spec)?;
    for name in ["a.pgm", "b.pgm", "c.pgm", "d.pgm"] {
        rec.path(name);
    }
    res.write_panels(&rec.dir)?;
    rec.write_json("report.json", &res.report)?;
    let r = &res.report;
    println!(
        "entries in [{}, {}]; ||A2~ - A2|| = {:.4e}; sign agreement {:.4}; C0 {} ({:.3e})",
        r.entry_min,
        r.entry_max,
        r.measured_error,
        r.sign_agreement,
        if r.c0_pass { "passes" } else { "fails" },
        r.c0_lhs
    );
    if !r.bound_holds() {
        return Err(Failure::new(EXIT_VIOLATION, "measured error exceeds the certified bound"));
    }
    Ok(())
}

fn sharpness(a: &SharpnessArgs, seed: u64, rec: &mut Recorder) -> Outcome {
    let rep = run_sharpness(a.n, a.c, a.trials, seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in &rep.trials {
        w.serialize(t).map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::new(EXIT_VIOLATION, e.to_string()))?;
    rec.write("sharpness.csv", &bytes)?;
    rec.write_json("report.json", &rep)?;
    println!(
        "ratio min {:.4} median {:.4} max {:.4}; lower bound holds in all trials: {}",
        rep.min_ratio, rep.median_ratio, rep.max_ratio, rep.lower_bound_all
    );
    if !rep.lower_bound_all {
        return Err(Failure::new(EXIT_VIOLATION, "truncation error fell below the singular value shift"));
    }
    Ok(())
}

fn parallel(a: &ParallelArgs, seed: u64, rec: &mut Recorder) -> Outcome {
    let rep = parallel_campaign(a.n, a.trials, seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "cosine"]).map_err(Error::from)?;
    for (i, c) in rep.cosines.iter().enumerate() {
        w.write_record([i.to_string(), format!("{c:?}")]).map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::new(EXIT_VIOLATION, e.to_string()))?;
    rec.write("cosines.csv", &bytes)?;
    rec.write_json("report.json", &rep)?;
    println!("median cosine {:.6}, min {:.6}", rep.median, rep.min);
    Ok(())
}
