use std::fs::File;
use std::fmt::Display;
use std::io::{BufWriter, ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use tsp::analysis::{error_curve, rate_report, verify_bounds, BoundKind, DEFAULT_SLACK};
use tsp::algebra::WeightQ;
use tsp::harness::{generate, run_experiment, ExperimentConfig, KernelSpec, ProblemKind, ProblemSpec, SketchChoice, SketchSpec};
use tsp::io::{load_tensor, save_tensor};
use tsp::rng::{stream, Purpose};
use tsp::solver::record::read_trace_csv;
use tsp::solver::{solve, spatial_probabilities, Method, ProbRule, RunRecord, SolverConfig, StopReason};
use tsp::{Result, TspError};

#[derive(Parser)]
#[command(name = "tsp", version, about = "Sketch-and-project solvers for t-product tensor systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a consistent system and write A.tns, X.tns, B.tns.
    Gen(GenArgs),
    /// Solve A∗X = B and optionally write the trace and the solution.
    Solve(SolveArgs),
    /// Run a multi-trial experiment from a TOML or JSON config.
    Bench(BenchArgs),
    /// Print the rate constants of a spatial sketch family as JSON.
    Rates(RatesArgs),
    /// Check trace CSVs against a convergence bound.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "gaussian")]
    kind: String,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    l: usize,
    #[arg(long, default_value_t = 5)]
    kernel_size: usize,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Clone)]
struct SketchArgs {
    /// slice, block, gaussian, fourier-row or fourier-gaussian
    #[arg(long, default_value = "slice")]
    sketch: SketchChoice,
    #[arg(long, default_value_t = 1)]
    tau: usize,
    #[arg(long)]
    q: Option<usize>,
    /// uniform, slice-norm, sketch-norm or fourier-row-norm
    #[arg(long, default_value = "uniform")]
    prob: ProbRule,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SketchArgs {
    fn spec(&self) -> SketchSpec {
        SketchSpec { kind: self.sketch, tau: self.tau, q: self.q }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    method: Method,
    #[command(flatten)]
    sketch: SketchArgs,
    /// Draw a fresh Gaussian sketch of this size every step (TSP, TSP-I, TSP-II).
    #[arg(long)]
    fresh_tau: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// A.tns and B.tns
    #[arg(long = "in", num_args = 2, value_names = ["A", "B"], required = true)]
    input: Vec<PathBuf>,
    /// Known solution; ε is the relative residual without it.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// T-SPD weight Q (n×n×l); identity when absent.
    #[arg(long)]
    weight: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the sketch family as JSON for replay.
    #[arg(long)]
    save_sketch: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
}

#[derive(Args)]
struct BenchArgs {
    config: PathBuf,
    /// Overrides the output directory in the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    traces: bool,
}

#[derive(Args)]
struct RatesArgs {
    #[arg(long)]
    a: PathBuf,
    #[command(flatten)]
    sketch: SketchArgs,
    #[arg(long)]
    weight: Option<PathBuf>,
    /// Range directions sampled for the max-distance constant.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    a: PathBuf,
    /// Reference solution; ‖X★‖_F turns logged ε back into squared errors.
    #[arg(long)]
    truth: PathBuf,
    #[command(flatten)]
    sketch: SketchArgs,
    /// tsp, ntsp, md, pr or cs
    #[arg(long)]
    bound: BoundKind,
    #[arg(long, default_value_t = DEFAULT_SLACK)]
    slack: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    traces: Vec<PathBuf>,
}

/// Prints one line; a closed pipe (e.g. `| head`) is not an error.
fn out(line: impl Display) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load_weight(path: &Option<PathBuf>) -> Result<Option<WeightQ>> {
    path.as_deref().map(|p| WeightQ::new(load_tensor(p)?)).transpose()
}

fn gen(args: &GenArgs) -> Result<()> {
    let kind = match args.kind.as_str() {
        "gaussian" => ProblemKind::Gaussian,
        "deblur" => ProblemKind::Deblur,
        other => return Err(TspError::InvalidConfig(format!("unknown problem kind `{other}`"))),
    };
    let spec = ProblemSpec {
        kind,
        m: args.m,
        n: args.n,
        p: args.p,
        l: args.l,
        kernel: (kind == ProblemKind::Deblur).then_some(KernelSpec { size: args.kernel_size, sigma: args.sigma }),
        seed: args.seed,
    };
    let g = generate(&spec, &mut stream(args.seed, Purpose::Problem, 0))?;
    std::fs::create_dir_all(&args.out_dir)?;
    save_tensor(&args.out_dir.join("A.tns"), &g.a)?;
    save_tensor(&args.out_dir.join("X.tns"), &g.x)?;
    save_tensor(&args.out_dir.join("B.tns"), &g.b)?;
    let (m, n, l) = g.a.dims();
    out(format!("A {m}x{n}x{l}, X {}x{}x{l} written to {}", g.x.rows(), g.x.cols(), args.out_dir.display()))?;
    Ok(())
}

fn solve_cmd(args: &SolveArgs) -> Result<()> {
    let a = load_tensor(&args.input[0])?;
    let b = load_tensor(&args.input[1])?;
    let truth = args.truth.as_deref().map(load_tensor).transpose()?;
    let set = args.sketch.spec().build(a.rows(), a.depth(), args.sketch.seed)?;
    if let Some(path) = &args.save_sketch {
        serde_json::to_writer(BufWriter::new(File::create(path)?), &set)?;
    }
    let mut config = SolverConfig::new(args.method, set);
    config.prob = args.sketch.prob.clone();
    config.theta = args.sketch.theta;
    config.fresh_tau = args.fresh_tau;
    config.seed = args.sketch.seed;
    config.tol_rel_err = args.tol;
    config.max_iters = args.max_iters;
    config.record_every = args.record_every;
    config.weight = load_weight(&args.weight)?;
    let solution = solve(&a, &b, truth.as_ref(), &config)?;
    let r = &solution.record;
    if let Some(path) = &args.trace {
        r.write_csv(File::create(path)?)?;
    }
    if let Some(path) = &args.out {
        save_tensor(path, &solution.x)?;
    }
    out(format!(
        "{}: {} iterations, epsilon {:.3e}, {:?}, {:.3}s (+{:.3}s setup)",
        r.method,
        r.iterations,
        r.final_epsilon(),
        r.stop,
        r.seconds(),
        r.precompute_seconds
    ))?;
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if args.out_dir.is_some() {
        config.output_dir = args.out_dir.clone();
    }
    config.write_traces |= args.traces;
    let result = run_experiment(&config)?;
    out(serde_json::to_string_pretty(&result.summary)?)?;
    Ok(())
}

fn rates(args: &RatesArgs) -> Result<()> {
    let a = load_tensor(&args.a)?;
    let weight = load_weight(&args.weight)?.unwrap_or_else(|| WeightQ::identity(a.cols(), a.depth()));
    let set = args.sketch.spec().build(a.rows(), a.depth(), args.sketch.seed)?;
    let p = spatial_probabilities(&a, Some(&weight), &set, &args.sketch.prob)?;
    let theta = args.sketch.theta.unwrap_or(0.5);
    let report = rate_report(&a, &weight, &set, &p, theta, args.samples, args.sketch.seed)?;
    out(serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn read_record(path: &Path) -> Result<RunRecord> {
    let rows = read_trace_csv(File::open(path)?)?;
    Ok(RunRecord {
        method: String::new(),
        seed: 0,
        iterations: rows.last().map_or(0, |r| r.t),
        rows,
        stop: StopReason::MaxIterations,
        precompute_seconds: 0.0,
        max_audit_deviation: None,
    })
}

fn verify(args: &VerifyArgs) -> Result<bool> {
    let a = load_tensor(&args.a)?;
    let truth = load_tensor(&args.truth)?;
    let weight = WeightQ::identity(a.cols(), a.depth());
    let set = args.sketch.spec().build(a.rows(), a.depth(), args.sketch.seed)?;
    let p = spatial_probabilities(&a, Some(&weight), &set, &args.sketch.prob)?;
    let theta = args.sketch.theta.unwrap_or(0.5);
    let report = rate_report(&a, &weight, &set, &p, theta, args.samples, args.sketch.seed)?;
    let curves = args
        .traces
        .iter()
        .map(|t| error_curve(&read_record(t)?, truth.fro_norm()))
        .collect::<Result<Vec<_>>>()?;
    let check = verify_bounds(&curves, &report, args.bound, args.slack)?;
    out(format!("bound {} rate {:.6} slack {} over {} traces", args.bound.tag(), check.rate, check.slack, curves.len()))?;
    out(format!("{:>8} {:>14} {:>14} {:>10}", "t", "observed", "envelope", "ratio"))?;
    let stride = (check.rows.len() / 20).max(1);
    for row in check.rows.iter().step_by(stride) {
        out(format!("{:>8} {:>14.6e} {:>14.6e} {:>10.4}", row.t, row.observed, row.envelope, row.ratio))?;
    }
    if let Some(w) = &check.worst {
        out(format!("worst t={} ratio {:.4}", w.t, w.ratio))?;
    }
    out(if check.passed { "PASS" } else { "FAIL" })?;
    Ok(check.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Solve(a) => solve_cmd(a).map(|_| true),
        Command::Bench(a) => bench(a).map(|_| true),
        Command::Rates(a) => rates(a).map(|_| true),
        Command::Verify(a) => verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
