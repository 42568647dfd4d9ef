//! File formats, reports and commands behind the `eqopt` binary.

pub mod model;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use eqopt_core::circuit::Circuit;
use eqopt_core::egraph::{default_ruleset, saturate, Clock, EGraph, SaturationLimits};
use eqopt_core::eqn::{parse_eqn, write_eqn, EqnError};
use eqopt_core::equiv::{check_equiv, EquivConfig, EquivReport, InterfaceError, Verdict};
use eqopt_core::extract::{build_pool, LocalCost, PoolConfig};
use eqopt_core::features::{extract_features, CostError, FeatureVector, Objective, TreeEnsembleModel, FEATURE_NAMES};
use eqopt_core::fuzz::{random_circuit, FuzzConfig};
use eqopt_core::pipeline::{cost_model, optimize, pool_sweep, OptimizeConfig, OptimizeError, Selector};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{load_model, LoadError};
use crate::report::RunReport;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const MODEL: i32 = 4;
    pub const EXTRACTION: i32 = 5;
    pub const CEC_FAILED: i32 = 6;
    pub const INTERFACE: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse {path}: {source}")]
    Parse { path: PathBuf, source: EqnError },
    #[error("model {path}: {source}")]
    Model { path: PathBuf, source: LoadError },
    #[error("objective {0} needs --{1}")]
    MissingModel(&'static str, &'static str),
    #[error("model {path}: objective is {got}, expected {expected}")]
    WrongObjective { path: PathBuf, got: &'static str, expected: &'static str },
    #[error("cost: {0}")]
    Cost(#[from] CostError),
    #[error("{path}: {source}")]
    Optimize { path: PathBuf, source: OptimizeError },
    #[error("{0}: result is not equivalent to the input")]
    CecFailed(PathBuf),
    #[error("interface mismatch: {0}")]
    Interface(#[from] InterfaceError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Csv(_) => exit::IO,
            CliError::Usage(_) => exit::USAGE,
            CliError::Parse { .. } => exit::PARSE,
            CliError::Model { .. } | CliError::MissingModel(..) | CliError::WrongObjective { .. } | CliError::Cost(_) => {
                exit::MODEL
            }
            CliError::Optimize { source, .. } => match source {
                OptimizeError::Model(_) => exit::MODEL,
                OptimizeError::Interface(_) => exit::INTERFACE,
                _ => exit::EXTRACTION,
            },
            CliError::CecFailed(_) => exit::CEC_FAILED,
            CliError::Interface(_) => exit::INTERFACE,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Wall clock for saturation limits and stage timing.
#[derive(Clone, Copy, Debug)]
pub struct StdClock(Instant);

impl StdClock {
    pub fn start() -> Self {
        StdClock(Instant::now())
    }
}

impl Clock for StdClock {
    fn elapsed(&self) -> Duration {
        self.0.elapsed()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum ObjectiveArg {
    Delay,
    Area,
    Balanced,
    AstSize,
    AstDepth,
}

impl ObjectiveArg {
    pub fn name(self) -> &'static str {
        match self {
            ObjectiveArg::Delay => "delay",
            ObjectiveArg::Area => "area",
            ObjectiveArg::Balanced => "balanced",
            ObjectiveArg::AstSize => "ast-size",
            ObjectiveArg::AstDepth => "ast-depth",
        }
    }
}

/// Delay and area models, loaded once.
#[derive(Clone, Debug, Default)]
pub struct Models {
    pub delay: Option<TreeEnsembleModel>,
    pub area: Option<TreeEnsembleModel>,
}

impl Models {
    pub fn load(delay: Option<&Path>, area: Option<&Path>) -> Result<Self, CliError> {
        let one = |path: Option<&Path>, want: Objective| -> Result<Option<TreeEnsembleModel>, CliError> {
            let Some(path) = path else { return Ok(None) };
            let m = load_model(path).map_err(|source| CliError::Model { path: path.into(), source })?;
            if m.objective() != want {
                return Err(CliError::WrongObjective {
                    path: path.into(),
                    got: m.objective().as_str(),
                    expected: want.as_str(),
                });
            }
            Ok(Some(m))
        };
        Ok(Models { delay: one(delay, Objective::Delay)?, area: one(area, Objective::Area)? })
    }

    pub fn selector(&self, objective: ObjectiveArg) -> Result<Selector, CliError> {
        let delay = || self.delay.clone().ok_or(CliError::MissingModel(objective.name(), "delay-model"));
        let area = || self.area.clone().ok_or(CliError::MissingModel(objective.name(), "area-model"));
        Ok(match objective {
            ObjectiveArg::AstSize => Selector::Analytic(LocalCost::AstSize),
            ObjectiveArg::AstDepth => Selector::Analytic(LocalCost::AstDepth),
            ObjectiveArg::Delay => Selector::Ensemble(delay()?),
            ObjectiveArg::Area => Selector::Ensemble(area()?),
            ObjectiveArg::Balanced => Selector::Balanced { delay: delay()?, area: area()? },
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub objective: ObjectiveArg,
    pub models: Models,
    pub optimize: OptimizeConfig,
}

pub fn read_circuit(path: &Path) -> Result<Circuit, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_eqn(&text).map_err(|source| CliError::Parse { path: path.into(), source })
}

/// `*.eqn` files directly under `dir`, sorted by file name.
pub fn eqn_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "eqn") {
            out.push(path);
        }
    }
    out.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(out)
}

pub fn circuit_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Optimizes one file. The CEC verdict is in the report; an inequivalent
/// result is returned, not raised, so callers can still write it out.
pub fn optimize_file(path: &Path, cfg: &RunConfig) -> Result<(Circuit, RunReport), CliError> {
    let clock = StdClock::start();
    let input = read_circuit(path)?;
    let parse = clock.elapsed();
    let selector = cfg.models.selector(cfg.objective)?;
    let run = optimize(&input, &selector, &cfg.optimize, &clock)
        .map_err(|source| CliError::Optimize { path: path.into(), source })?;
    let report = RunReport::new(&path.display().to_string(), cfg.objective.name(), cfg.optimize.pool.seed, &run, parse);
    Ok((run.circuit, report))
}

pub fn is_failure(report: &RunReport) -> bool {
    report.cec.verdict == Verdict::Inequivalent.as_str()
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

pub fn write_outputs(circuit: &Circuit, report: &RunReport, output: Option<&Path>, report_path: Option<&Path>) -> Result<(), CliError> {
    if let Some(out) = output {
        write_file(out, &write_eqn(circuit))?;
    }
    if let Some(r) = report_path {
        write_file(r, &(report.to_json() + "\n"))?;
    }
    Ok(())
}

/// A corpus file and how its run went.
pub type FileOutcome = (PathBuf, Result<RunReport, CliError>);

/// Optimizes every file of `corpus` on `jobs` workers, writing
/// `<out_dir>/<name>.eqn` and `<report_dir>/<name>.json`. Results come back
/// in file order.
pub fn optimize_corpus(
    corpus: &Path,
    cfg: &RunConfig,
    out_dir: Option<&Path>,
    report_dir: Option<&Path>,
    jobs: usize,
) -> Result<Vec<FileOutcome>, CliError> {
    let files = eqn_files(corpus)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let name = circuit_name(path);
                let result = optimize_file(path, cfg).and_then(|(c, r)| {
                    let out = out_dir.map(|d| d.join(format!("{name}.eqn")));
                    let rep = report_dir.map(|d| d.join(format!("{name}.json")));
                    write_outputs(&c, &r, out.as_deref(), rep.as_deref())?;
                    Ok(r)
                });
                (path.clone(), result)
            })
            .collect()
    }))
}

pub fn feature_header() -> Vec<&'static str> {
    std::iter::once("name").chain(FEATURE_NAMES).collect()
}

/// Features of the whole circuit (several outputs are taken together).
pub fn circuit_features(circuit: &Circuit) -> FeatureVector {
    let mut c = circuit.clone();
    match c.root() {
        Ok(root) => extract_features(&c.store, root),
        Err(_) => FeatureVector { and_count: 0, or_count: 0, not_count: 0, node_count: 0, depth: 0, density: 0.0, edge_sum: 0 },
    }
}

/// One feature row per input; a directory contributes its `*.eqn` files in
/// name order.
pub fn feature_rows(input: &Path) -> Result<Vec<(String, FeatureVector)>, CliError> {
    let files = if input.is_dir() { eqn_files(input)? } else { vec![input.to_path_buf()] };
    files.iter().map(|p| Ok((circuit_name(p), circuit_features(&read_circuit(p)?)))).collect()
}

/// Writes the trainer's CSV. In append mode the header is written only if
/// the file is new or empty.
pub fn write_feature_csv(rows: &[(String, FeatureVector)], out: &Path, append: bool) -> Result<(), CliError> {
    let fresh = !append || fs::metadata(out).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(out)
        .map_err(io_err(out))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(feature_header())?;
    }
    for (name, f) in rows {
        let values = f.to_string();
        w.write_record(std::iter::once(name.as_str()).chain(values.split(',')))?;
    }
    w.flush().map_err(io_err(out))?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub objectives: Vec<ObjectiveArg>,
    pub pool_sizes: Vec<usize>,
    pub models: Models,
    pub optimize: OptimizeConfig,
    pub jobs: usize,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BenchRow {
    pub circuit: String,
    pub objective: String,
    pub strategy: String,
    pub pool_size: Option<usize>,
    pub cost: Option<f64>,
    pub wall_time_s: f64,
    /// Pool rows: best pool cost is at most both greedy costs.
    pub dominates: Option<bool>,
    pub error: Option<String>,
}

fn bench_circuit(path: &Path, cfg: &BenchConfig) -> Vec<BenchRow> {
    let name = circuit_name(path);
    let fail = |objective: &str, e: String| BenchRow {
        circuit: name.clone(),
        objective: objective.into(),
        strategy: "error".into(),
        pool_size: None,
        cost: None,
        wall_time_s: 0.0,
        dominates: None,
        error: Some(e),
    };
    let mut circuit = match read_circuit(path) {
        Ok(c) => c,
        Err(e) => return vec![fail("", e.to_string())],
    };
    let clock = StdClock::start();
    let root = match circuit.root() {
        Ok(r) => r,
        Err(e) => return vec![fail("", e.to_string())],
    };
    let mut g = EGraph::new();
    let class = match g.add_term(&circuit.store, root) {
        Ok(c) => c,
        Err(e) => return vec![fail("", e.to_string())],
    };
    saturate(&mut g, &default_ruleset(), &cfg.optimize.limits, &clock);
    let saturate_time = clock.elapsed();

    let largest = cfg.pool_sizes.iter().copied().max().unwrap_or(2).max(2);
    let pool_cfg = PoolConfig { pool_size: largest, ..cfg.optimize.pool.clone() };
    let started = clock.elapsed();
    let pool = match build_pool(&g, class, &pool_cfg) {
        Ok(p) => p,
        Err(e) => return vec![fail("", e.to_string())],
    };
    let pool_time = clock.elapsed() - started;

    let mut rows = Vec::new();
    for &objective in &cfg.objectives {
        let result = cfg
            .models
            .selector(objective)
            .and_then(|s| Ok(cost_model(&s, &pool)?))
            .and_then(|m| {
                let seed_cost = |i: usize| m.cost(&pool.store, pool.candidates[i].term);
                let greedy = (seed_cost(pool.min_size)?, seed_cost(pool.min_depth)?);
                let sweep = pool_sweep(&pool, &m, &cfg.pool_sizes).map_err(|e| CliError::Usage(e.to_string()))?;
                Ok((greedy, sweep))
            });
        let ((size_cost, depth_cost), sweep) = match result {
            Ok(v) => v,
            Err(e) => {
                rows.push(fail(objective.name(), e.to_string()));
                continue;
            }
        };
        let row = |strategy: &str, pool_size: Option<usize>, cost: f64, dominates: Option<bool>| BenchRow {
            circuit: name.clone(),
            objective: objective.name().into(),
            strategy: strategy.into(),
            pool_size,
            cost: Some(cost),
            wall_time_s: (saturate_time + pool_time).as_secs_f64(),
            dominates,
            error: None,
        };
        rows.push(row("greedy-size", None, size_cost, None));
        rows.push(row("greedy-depth", None, depth_cost, None));
        for (&size, &cost) in cfg.pool_sizes.iter().zip(&sweep) {
            rows.push(row("pool", Some(size), cost, Some(cost <= size_cost && cost <= depth_cost)));
        }
    }
    rows
}

/// Runs greedy and pool extraction over a corpus. Per-circuit failures are
/// recorded as `error` rows.
pub fn bench(corpus: &Path, cfg: &BenchConfig) -> Result<Vec<BenchRow>, CliError> {
    let files = eqn_files(corpus)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("worker pool: {e}")))?;
    let rows: Vec<Vec<BenchRow>> = pool.install(|| files.par_iter().map(|p| bench_circuit(p, cfg)).collect());
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_bench_csv(rows: &[BenchRow], out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["circuit", "objective", "strategy", "pool_size", "cost", "wall_time_s", "dominates", "error"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| CliError::Io { path: "<bench output>".into(), source })?;
    Ok(())
}

pub fn check_files(a: &Path, b: &Path, cfg: &EquivConfig) -> Result<EquivReport, CliError> {
    Ok(check_equiv(&read_circuit(a)?, &read_circuit(b)?, cfg)?)
}

/// Writes `count` random circuits as `fuzz_NNNN.eqn`.
pub fn generate_corpus(dir: &Path, count: usize, seed: u64, fuzz: &FuzzConfig) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    (0..count)
        .map(|i| {
            let c = random_circuit(&mut eqopt_core::extract::draw_rng(seed, i), fuzz);
            let path = dir.join(format!("fuzz_{i:04}.eqn"));
            write_file(&path, &write_eqn(&c))?;
            Ok(path)
        })
        .collect()
}

pub fn print_equiv(report: &EquivReport, out: &mut dyn std::io::Write) -> std::io::Result<()> {
    writeln!(out, "verdict: {}", report.verdict.as_str())?;
    writeln!(out, "method: {}", report.method.as_str())?;
    writeln!(out, "vectors: {}", report.vectors_tested)?;
    if let Some(c) = &report.counterexample {
        let assignment: Vec<String> = c.assignment.iter().map(|(n, v)| format!("{n}={}", u8::from(*v))).collect();
        writeln!(out, "counterexample: {} (output {})", assignment.join(" "), c.output)?;
    }
    Ok(())
}

/// Saturation limits, pool and CEC settings with the desk profile applied
/// when `desk` is set.
pub fn base_config(desk: bool) -> OptimizeConfig {
    let limits = if desk { SaturationLimits::desk() } else { SaturationLimits::default() };
    OptimizeConfig { limits, pool: PoolConfig::default(), equiv: EquivConfig::default() }
}
