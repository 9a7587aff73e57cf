//! `planhint` command-line tool.

mod client;
mod commands;
mod config;
mod error;
mod mock;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BenchArgs, CostModelKind, DatasetArgs, EnumerateArgs, HintFormat, Pipeline, SelectStrategy, Source, Workload};
use config::{FixtureSource, Mode, RunConfig};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "planhint", version, about = "Hint-driven plan generation, labeling and selection")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "PLANHINT_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    mode: Option<Mode>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Recorded fixture directory; implies fixture source `store`.
    #[arg(long, global = true)]
    fixture_path: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the catalog statistics snapshot as JSON.
    Snapshot {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List every plan of a plan space as single-line hint sets.
    Enumerate {
        #[arg(long)]
        tables: usize,
        /// Scan operators: a count (prefix of the full list) or comma-separated hint names.
        #[arg(long, default_value = "5")]
        scans: String,
        /// Join operators, same forms as `--scans`.
        #[arg(long, default_value = "3")]
        joins: String,
        #[arg(long)]
        left_deep: bool,
        /// Print the number of plans instead.
        #[arg(long)]
        count: bool,
        /// Print the number of plans up to join commutativity instead.
        #[arg(long)]
        unordered: bool,
        /// Comma-separated table aliases; `t1..tN` by default.
        #[arg(long)]
        aliases: Option<String>,
        #[arg(long, default_value_t = planhint::plan_space::DEFAULT_ENUMERATION_CAP)]
        cap: usize,
    },
    /// Convert an EXPLAIN (FORMAT JSON) document to hints.
    Transform {
        /// EXPLAIN output file, `-` for stdin.
        #[arg(long)]
        explain: PathBuf,
        #[arg(long, value_enum, default_value = "lines")]
        format: HintFormat,
    },
    /// Write candidate hint sets per query as JSON lines.
    Candidates {
        #[command(flatten)]
        workload: Workload,
        #[arg(long, value_enum, default_value = "arms")]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute candidates and store latency labels.
    Collect {
        #[command(flatten)]
        workload: Workload,
        #[arg(long, value_enum, default_value = "arms")]
        source: Source,
        /// Run every candidate under the global limit.
        #[arg(long)]
        evaluation: bool,
        /// Label file; `<output_dir>/labels.jsonl` by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label a workload and emit training records with a split.
    Dataset {
        #[command(flatten)]
        workload: Workload,
        #[arg(long, value_enum, default_value = "both")]
        source: Source,
        #[arg(long, default_value = "workload")]
        benchmark: String,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        #[arg(long, default_value_t = 100)]
        validation_count: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Select a candidate per labeled query and report accuracy.
    Select {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum)]
        strategy: SelectStrategy,
        /// Per-query outcomes as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a pipeline end to end and report latency sums.
    Bench {
        #[command(flatten)]
        workload: Workload,
        #[arg(long, value_enum, default_value = "gs")]
        pipeline: Pipeline,
        /// Ranking used by pipeline `g`.
        #[arg(long, value_enum, default_value = "planner")]
        cost_model: CostModelKind,
        /// Per-query reports as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixture maintenance.
    Fixtures {
        #[command(subcommand)]
        action: FixturesAction,
    },
}

#[derive(Debug, Subcommand)]
enum FixturesAction {
    /// Record everything the other commands ask for a workload.
    Generate {
        #[command(flatten)]
        workload: Workload,
        #[arg(long)]
        out: PathBuf,
    },
}

fn config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok())?;
    if let Some(m) = cli.mode {
        cfg.mode = m;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.fixture_path {
        cfg.fixture.source = FixtureSource::Store;
        cfg.fixture.path = Some(p.clone());
    }
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Command::Enumerate { tables, scans, joins, left_deep, count, unordered, aliases, cap } = cli.command {
        return commands::enumerate(&EnumerateArgs { tables, scans, joins, left_deep, count, unordered, aliases, cap });
    }
    if let Command::Transform { explain, format } = &cli.command {
        return commands::transform(explain, *format);
    }
    let cfg = config(&cli)?;
    log::debug!("configuration: {cfg:?}");
    match &cli.command {
        Command::Snapshot { out } => commands::snapshot(&cfg, out.as_deref()),
        Command::Candidates { workload, source, out } => commands::candidates(&cfg, workload, *source, out.as_deref()),
        Command::Collect { workload, source, evaluation, out } => {
            commands::collect(&cfg, workload, *source, *evaluation, out.as_deref())
        }
        Command::Dataset { workload, source, benchmark, test_fraction, validation_count, out_dir } => {
            let args = DatasetArgs {
                source: *source,
                benchmark: benchmark.clone(),
                test_fraction: *test_fraction,
                validation_count: *validation_count,
                out_dir: out_dir.clone(),
            };
            commands::dataset(&cfg, workload, &args)
        }
        Command::Select { labels, strategy, out } => commands::select(&cfg, labels, *strategy, out.as_deref()),
        Command::Bench { workload, pipeline, cost_model, out } => {
            commands::bench(&cfg, workload, &BenchArgs { pipeline: *pipeline, cost_model: *cost_model }, out.as_deref())
        }
        Command::Fixtures { action: FixturesAction::Generate { workload, out } } => {
            if cfg.mode == Mode::Live {
                log::info!("recording from the live database");
            }
            commands::fixtures_generate(&cfg, workload, out)
        }
        Command::Enumerate { .. } | Command::Transform { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
