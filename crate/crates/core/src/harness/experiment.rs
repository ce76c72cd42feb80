//! Multi-trial experiments: generate, solve every configured method, aggregate.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::{generate, GeneratedProblem, ProblemSpec};
use crate::error::{Result, TspError};
use crate::rng::{stream, Purpose};
use crate::sketch::{
    contiguous_partition, make_block_sketches, make_fourier_sketches, make_gaussian_sketches, make_slice_sketches,
    FourierSketchKind, SketchSet,
};
use crate::solver::{solve, Method, ProbRule, RunRecord, SliceStreams, SolverConfig};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "TSP_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SketchChoice {
    /// Lateral slices of the identity (τ = 1, q = m).
    Slice,
    /// Contiguous row blocks of size τ.
    Block,
    /// q Gaussian members of size τ.
    Gaussian,
    /// Per-slice coordinate groups of size τ, q of them.
    FourierRow,
    /// Per-slice Gaussian members of size τ, q of them.
    FourierGaussian,
}

impl std::str::FromStr for SketchChoice {
    type Err = TspError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "slice" => Ok(SketchChoice::Slice),
            "block" => Ok(SketchChoice::Block),
            "gaussian" => Ok(SketchChoice::Gaussian),
            "fourier-row" | "row" => Ok(SketchChoice::FourierRow),
            "fourier-gaussian" => Ok(SketchChoice::FourierGaussian),
            other => Err(TspError::InvalidConfig(format!("unknown sketch kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub kind: SketchChoice,
    #[serde(default = "one")]
    pub tau: usize,
    /// Number of members; defaults to ⌈m/τ⌉.
    #[serde(default)]
    pub q: Option<usize>,
}

fn one() -> usize {
    1
}

impl SketchSpec {
    /// Builds the family for an m×·×l operator, drawing random members from `seed`.
    pub fn build(&self, m: usize, l: usize, seed: u64) -> Result<SketchSet> {
        let tau = self.tau.max(1);
        let q = self.q.unwrap_or(m.div_ceil(tau));
        match self.kind {
            SketchChoice::Slice => Ok(make_slice_sketches(m, l)),
            SketchChoice::Block => make_block_sketches(m, l, &contiguous_partition(m, tau)),
            SketchChoice::Gaussian => make_gaussian_sketches(m, tau, q, l, &mut stream(seed, Purpose::SketchSet, 1 << 20)),
            SketchChoice::FourierRow => make_fourier_sketches(m, tau, q.min(m / tau), l, FourierSketchKind::Row, seed),
            SketchChoice::FourierGaussian => make_fourier_sketches(m, tau, q, l, FourierSketchKind::Gaussian, seed),
        }
    }
}

/// One method entry of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    /// Output label; defaults to the method name.
    #[serde(default)]
    pub label: Option<String>,
    pub method: Method,
    pub sketch: SketchSpec,
    #[serde(default = "uniform")]
    pub prob: ProbRule,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub fresh_tau: Option<usize>,
    #[serde(default)]
    pub shared_slice_streams: bool,
}

fn uniform() -> ProbRule {
    ProbRule::Uniform
}

impl MethodSpec {
    pub fn new(method: Method, sketch: SketchSpec) -> Self {
        Self { label: None, method, sketch, prob: ProbRule::Uniform, theta: None, fresh_tau: None, shared_slice_streams: false }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.method.name().to_string())
    }

    pub fn solver_config(&self, set: SketchSet, seed: u64, tol: f64, max_iters: usize) -> SolverConfig {
        let mut c = SolverConfig::new(self.method, set);
        c.prob = self.prob.clone();
        c.theta = self.theta;
        c.fresh_tau = self.fresh_tau;
        c.seed = seed;
        c.tol_rel_err = tol;
        c.max_iters = max_iters;
        if self.shared_slice_streams {
            c.slice_streams = SliceStreams::Shared;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Directory for curves, traces and the summary; nothing is written when absent.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub write_traces: bool,
}

fn default_trials() -> usize {
    10
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_iters() -> usize {
    100_000
}

impl ExperimentConfig {
    /// Parses TOML or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| TspError::Parse(format!("{}: {e}", path.display())))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub label: String,
    pub method: String,
    pub trials: usize,
    pub converged: usize,
    pub failed: usize,
    /// Iterations to reach the tolerance, over converged trials.
    pub iterations: Option<Stat>,
    /// Iteration-loop seconds to reach the tolerance, over converged trials.
    pub seconds: Option<Stat>,
    pub precompute_seconds: Option<Stat>,
    pub final_epsilon: Option<Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub problem: ProblemSpec,
    pub trials: usize,
    pub tol: f64,
    pub methods: Vec<MethodSummary>,
}

/// Trial-averaged curves; a finished run holds its last value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCurve {
    pub epsilon: Vec<f64>,
    pub seconds: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrialRun {
    pub label: String,
    pub trial: usize,
    pub outcome: std::result::Result<RunRecord, String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub summary: Summary,
    pub curves: BTreeMap<String, MeanCurve>,
    pub runs: Vec<TrialRun>,
}

impl ExperimentResult {
    pub fn summary_for(&self, label: &str) -> Option<&MethodSummary> {
        self.summary.methods.iter().find(|m| m.label == label)
    }
}

/// Seed of trial `trial`: the base seed advanced by the trial index.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| TspError::InvalidConfig(format!("{THREADS_ENV}={v} is not a count")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| TspError::InvalidConfig(format!("thread pool: {e}")))
}

fn run_one(spec: &MethodSpec, problem: &GeneratedProblem, seed: u64, config: &ExperimentConfig) -> Result<RunRecord> {
    let (m, _, l) = problem.a.dims();
    let set = spec.sketch.build(m, l, seed)?;
    let c = spec.solver_config(set, seed, config.tol, config.max_iters);
    Ok(solve(&problem.a, &problem.b, Some(&problem.x), &c)?.record)
}

fn mean_curve(records: &[&RunRecord]) -> MeanCurve {
    let len = records.iter().map(|r| r.rows.last().map_or(0, |row| row.t + 1)).max().unwrap_or(0);
    let mut epsilon = vec![0.0; len];
    let mut seconds = vec![0.0; len];
    for r in records {
        // rows may be thinned; hold each logged value until the next one
        let mut idx = 0;
        for t in 0..len {
            while idx + 1 < r.rows.len() && r.rows[idx + 1].t <= t {
                idx += 1;
            }
            epsilon[t] += r.rows[idx].epsilon;
            seconds[t] += r.rows[idx].seconds;
        }
    }
    let n = records.len().max(1) as f64;
    MeanCurve { epsilon: epsilon.into_iter().map(|v| v / n).collect(), seconds: seconds.into_iter().map(|v| v / n).collect() }
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Runs every method on `trials` generated problems in parallel.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.methods.is_empty() || config.trials == 0 {
        return Err(TspError::InvalidConfig("experiment needs at least one method and one trial".into()));
    }
    let pool = thread_pool()?;
    let problems: Vec<GeneratedProblem> = (0..config.trials)
        .map(|t| generate(&config.problem, &mut stream(trial_seed(config.problem.seed, t), Purpose::Problem, 0)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..config.trials).flat_map(|t| (0..config.methods.len()).map(move |m| (t, m))).collect();
    let mut runs: Vec<TrialRun> = pool.install(|| {
        jobs.par_iter()
            .map(|&(trial, mi)| {
                let spec = &config.methods[mi];
                let seed = trial_seed(config.problem.seed, trial);
                let outcome = run_one(spec, &problems[trial], seed, config).map_err(|e| {
                    warn!("{} trial {trial} aborted: {e}", spec.label());
                    e.to_string()
                });
                TrialRun { label: spec.label(), trial, outcome }
            })
            .collect()
    });
    runs.sort_by(|a, b| (a.label.as_str(), a.trial).cmp(&(b.label.as_str(), b.trial)));

    let mut methods = Vec::new();
    let mut curves = BTreeMap::new();
    for spec in &config.methods {
        let label = spec.label();
        if curves.contains_key(&label) {
            continue;
        }
        let mine: Vec<&TrialRun> = runs.iter().filter(|r| r.label == label).collect();
        let ok: Vec<&RunRecord> = mine.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let conv: Vec<&RunRecord> = ok.iter().copied().filter(|r| r.converged()).collect();
        let iters: Vec<f64> = conv.iter().map(|r| r.iterations as f64).collect();
        let secs: Vec<f64> = conv.iter().map(|r| r.seconds()).collect();
        let pre: Vec<f64> = ok.iter().map(|r| r.precompute_seconds).collect();
        let fin: Vec<f64> = ok.iter().map(|r| r.final_epsilon()).collect();
        info!("{label}: {}/{} trials converged", conv.len(), mine.len());
        methods.push(MethodSummary {
            label: label.clone(),
            method: spec.method.name().to_string(),
            trials: mine.len(),
            converged: conv.len(),
            failed: mine.len() - ok.len(),
            iterations: Stat::of(&iters),
            seconds: Stat::of(&secs),
            precompute_seconds: Stat::of(&pre),
            final_epsilon: Stat::of(&fin),
        });
        curves.insert(label, mean_curve(&ok));
    }
    let result = ExperimentResult {
        summary: Summary { problem: config.problem.clone(), trials: config.trials, tol: config.tol, methods },
        curves,
        runs,
    };
    if let Some(dir) = &config.output_dir {
        write_outputs(dir, &result, config.write_traces)?;
    }
    Ok(result)
}

/// Writes `<label>_iter.csv` (t, mean_epsilon), `<label>_time.csv`
/// (mean_seconds, mean_epsilon), `summary.json` and optionally per-trial traces.
pub fn write_outputs(dir: &Path, result: &ExperimentResult, traces: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (label, curve) in &result.curves {
        let stem = file_stem(label);
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}_iter.csv")))?;
        w.write_record(["t", "mean_epsilon"])?;
        for (t, e) in curve.epsilon.iter().enumerate() {
            w.write_record([t.to_string(), format!("{e:e}")])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join(format!("{stem}_time.csv")))?;
        w.write_record(["mean_seconds", "mean_epsilon"])?;
        for (s, e) in curve.seconds.iter().zip(&curve.epsilon) {
            w.write_record([format!("{s:e}"), format!("{e:e}")])?;
        }
        w.flush()?;
    }
    if traces {
        let tdir = dir.join("traces");
        fs::create_dir_all(&tdir)?;
        for run in &result.runs {
            if let Ok(record) = &run.outcome {
                let f = fs::File::create(tdir.join(format!("{}_trial{}.csv", file_stem(&run.label), run.trial)))?;
                record.write_csv(f)?;
            }
        }
    }
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&result.summary)?)?;
    Ok(())
}

/// The desk-scale synthetic comparison: every method on a Gaussian system.
pub fn all_methods_config(problem: ProblemSpec, trials: usize, tol: f64) -> ExperimentConfig {
    let spatial = SketchSpec { kind: SketchChoice::Slice, tau: 1, q: None };
    let per_slice = SketchSpec { kind: SketchChoice::FourierRow, tau: 1, q: None };
    let methods = Method::ALL
        .into_iter()
        .map(|m| MethodSpec::new(m, if m.needs_per_slice() { per_slice.clone() } else { spatial.clone() }))
        .collect();
    ExperimentConfig { problem, methods, trials, tol, max_iters: 200_000, output_dir: None, write_traces: false }
}
