use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqopt::{exit, CliError, Models, ObjectiveArg, RunConfig};
use eqopt_core::equiv::EquivConfig;
use eqopt_core::fuzz::FuzzConfig;
use eqopt_core::pipeline::OptimizeConfig;

/// E-graph optimizer for combinational Boolean logic in equation format.
///
/// Every flag can also be set through an `EQOPT_*` environment variable,
/// e.g. `EQOPT_TIME_LIMIT=60`.
#[derive(Parser)]
#[command(name = "eqopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Saturate, extract a candidate pool, select and verify.
    Optimize(OptimizeArgs),
    /// Write the feature CSV used to train cost models.
    Features(FeaturesArgs),
    /// Compare greedy and pool extraction over a corpus.
    Bench(BenchArgs),
    /// Check two circuits for combinational equivalence.
    Check(CheckArgs),
    /// Write a corpus of random circuits.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

fn parse_ratio(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or("expected A:B, e.g. 1:3")?;
    let a = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    Ok((a, b))
}

#[derive(Args, Clone)]
struct Engine {
    #[arg(long, env = "EQOPT_DELAY_MODEL")]
    delay_model: Option<PathBuf>,
    #[arg(long, env = "EQOPT_AREA_MODEL")]
    area_model: Option<PathBuf>,
    /// Saturation time limit in seconds.
    #[arg(long, env = "EQOPT_TIME_LIMIT", default_value_t = 300.0)]
    time_limit: f64,
    #[arg(long, env = "EQOPT_NODE_LIMIT", default_value_t = 2_500_000)]
    node_limit: usize,
    #[arg(long, env = "EQOPT_ITER_LIMIT", default_value_t = 30)]
    iter_limit: usize,
    #[arg(long, env = "EQOPT_POOL_SIZE", default_value_t = 122)]
    pool_size: usize,
    #[arg(long, env = "EQOPT_P_SUBOPTIMAL", default_value_t = 0.2)]
    p_suboptimal: f64,
    /// Draws of strategy a to strategy b.
    #[arg(long, env = "EQOPT_STRATEGY_RATIO", default_value = "1:3", value_parser = parse_ratio)]
    strategy_ratio: (u32, u32),
    #[arg(long, env = "EQOPT_SEED", default_value_t = 0)]
    seed: u64,
    /// Largest input count checked exhaustively.
    #[arg(long, env = "EQOPT_CEC_EXHAUSTIVE_LIMIT", default_value_t = 12)]
    cec_exhaustive_limit: usize,
    /// Random vectors above the exhaustive limit.
    #[arg(long, env = "EQOPT_CEC_VECTORS", default_value_t = 10_000)]
    cec_vectors: usize,
    #[arg(long, env = "EQOPT_JOBS", default_value_t = 1)]
    jobs: usize,
}

impl Engine {
    fn config(&self) -> Result<OptimizeConfig, CliError> {
        let usage = |m: &str| Err(CliError::Usage(m.into()));
        if !(self.time_limit.is_finite() && self.time_limit > 0.0) {
            return usage("--time-limit must be positive");
        }
        if self.node_limit == 0 || self.iter_limit == 0 || self.jobs == 0 || self.cec_vectors == 0 {
            return usage("limits, --jobs and --cec-vectors must be positive");
        }
        let mut cfg = OptimizeConfig::default();
        cfg.limits.time_limit = Duration::from_secs_f64(self.time_limit);
        cfg.limits.node_limit = self.node_limit;
        cfg.limits.iter_limit = self.iter_limit;
        cfg.pool.pool_size = self.pool_size;
        cfg.pool.p_suboptimal = self.p_suboptimal;
        cfg.pool.strategy_ratio = self.strategy_ratio;
        cfg.pool.seed = self.seed;
        cfg.pool.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.equiv = self.equiv();
        Ok(cfg)
    }

    fn equiv(&self) -> EquivConfig {
        EquivConfig { exhaustive_input_limit: self.cec_exhaustive_limit, random_vectors: self.cec_vectors, seed: self.seed }
    }

    fn models(&self) -> Result<Models, CliError> {
        Models::load(self.delay_model.as_deref(), self.area_model.as_deref())
    }
}

#[derive(Args)]
struct OptimizeArgs {
    /// Input circuit.
    #[arg(long, env = "EQOPT_INPUT", conflicts_with = "corpus", required_unless_present = "corpus")]
    input: Option<PathBuf>,
    /// Directory of `.eqn` files; --output and --report then name directories.
    #[arg(long, env = "EQOPT_CORPUS")]
    corpus: Option<PathBuf>,
    /// Optimized circuit; printed to stdout when omitted.
    #[arg(long, env = "EQOPT_OUTPUT")]
    output: Option<PathBuf>,
    #[arg(long, env = "EQOPT_OBJECTIVE", value_enum, default_value = "ast-size")]
    objective: ObjectiveArg,
    /// Report destination; printed to stderr when omitted.
    #[arg(long, env = "EQOPT_REPORT")]
    report: Option<PathBuf>,
    #[arg(long, env = "EQOPT_FORMAT", value_enum, default_value = "json")]
    format: Format,
    #[command(flatten)]
    engine: Engine,
}

#[derive(Args)]
struct FeaturesArgs {
    /// A circuit or a directory of `.eqn` files.
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Append rows; the header is written only to an empty file.
    #[arg(long)]
    append: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, env = "EQOPT_CORPUS")]
    corpus: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ast-size,ast-depth")]
    objectives: Vec<ObjectiveArg>,
    #[arg(long, value_delimiter = ',', default_value = "2,10,50,100,150")]
    pool_sizes: Vec<usize>,
    #[command(flatten)]
    engine: Engine,
}

#[derive(Args)]
struct CheckArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 12)]
    cec_exhaustive_limit: usize,
    #[arg(long, default_value_t = 10_000)]
    cec_vectors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory.
    dir: PathBuf,
    #[arg(long, default_value_t = 500)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_inputs: usize,
    #[arg(long, default_value_t = 60)]
    max_nodes: usize,
    #[arg(long, default_value_t = 3)]
    max_outputs: usize,
}

fn render(report: &eqopt::report::RunReport, format: Format) -> String {
    match format {
        Format::Json => report.to_json() + "\n",
        Format::Table => report.to_table(),
    }
}

fn run_optimize(a: OptimizeArgs) -> Result<i32, CliError> {
    let cfg = RunConfig { objective: a.objective, models: a.engine.models()?, optimize: a.engine.config()? };
    // Fail on missing models before any work is done.
    cfg.models.selector(cfg.objective)?;

    if let Some(corpus) = &a.corpus {
        let results = eqopt::optimize_corpus(corpus, &cfg, a.output.as_deref(), a.report.as_deref(), a.engine.jobs)?;
        let mut code = exit::OK;
        for (path, r) in results {
            match r {
                Ok(report) if eqopt::is_failure(&report) => {
                    eprintln!("{}", CliError::CecFailed(path));
                    code = code.max(exit::CEC_FAILED);
                }
                Ok(_) => {}
                Err(e) => {
                    eprintln!("error: {e}");
                    code = code.max(e.exit_code());
                }
            }
        }
        return Ok(code);
    }

    let input = a.input.expect("clap requires --input without --corpus");
    let (circuit, report) = eqopt::optimize_file(&input, &cfg)?;
    match &a.output {
        Some(out) => eqopt::write_file(out, &eqopt_core::eqn::write_eqn(&circuit))?,
        None => print!("{}", eqopt_core::eqn::write_eqn(&circuit)),
    }
    match &a.report {
        Some(path) => eqopt::write_file(path, &render(&report, a.format))?,
        None => eprint!("{}", render(&report, a.format)),
    }
    if eqopt::is_failure(&report) {
        return Err(CliError::CecFailed(input));
    }
    Ok(exit::OK)
}

fn run_bench(a: BenchArgs) -> Result<i32, CliError> {
    let cfg = eqopt::BenchConfig {
        objectives: a.objectives,
        pool_sizes: a.pool_sizes,
        models: a.engine.models()?,
        optimize: a.engine.config()?,
        jobs: a.engine.jobs,
    };
    let rows = eqopt::bench(&a.corpus, &cfg)?;
    match &a.output {
        Some(path) => {
            let mut buf = Vec::new();
            eqopt::write_bench_csv(&rows, &mut buf)?;
            eqopt::write_file(path, &String::from_utf8_lossy(&buf))?;
        }
        None => eqopt::write_bench_csv(&rows, &mut std::io::stdout().lock())?,
    }
    Ok(exit::OK)
}

fn run_check(a: CheckArgs) -> Result<i32, CliError> {
    let cfg = EquivConfig { exhaustive_input_limit: a.cec_exhaustive_limit, random_vectors: a.cec_vectors, seed: a.seed };
    let report = eqopt::check_files(&a.a, &a.b, &cfg)?;
    let _ = eqopt::print_equiv(&report, &mut std::io::stdout().lock());
    Ok(if report.verdict == eqopt_core::equiv::Verdict::Inequivalent { exit::CEC_FAILED } else { exit::OK })
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Optimize(a) => run_optimize(a),
        Command::Features(a) => {
            let rows = eqopt::feature_rows(&a.input)?;
            eqopt::write_feature_csv(&rows, &a.output, a.append)?;
            Ok(exit::OK)
        }
        Command::Bench(a) => run_bench(a),
        Command::Check(a) => run_check(a),
        Command::Gen(a) => {
            let fuzz = FuzzConfig { max_inputs: a.max_inputs, max_nodes: a.max_nodes, max_outputs: a.max_outputs };
            let paths = eqopt::generate_corpus(&a.dir, a.count, a.seed, &fuzz)?;
            let _ = writeln!(std::io::stderr(), "wrote {} circuits to {}", paths.len(), a.dir.display());
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
