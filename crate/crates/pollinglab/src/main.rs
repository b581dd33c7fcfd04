use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pollinglab::commands::{
    self, CheckOptions, OptimizeOptions, RunOptions, SimulateOptions, SweepOptions, TraceOptions,
};
use pollinglab::{thread_pool, CliError, CliResult, LoadedConfig, SweepRange};
use pollinglab_core::decision::TimerSearch;
use pollinglab_core::{Horizon, Scenario, Strategy};

/// Mean delay of polling systems with wait-and-see strategies.
///
/// Exit status: 0 on success, 2 for invalid input, 3 when a numerical
/// method fails, 4 on I/O errors. POLLINGLAB_THREADS caps the number of
/// worker threads.
#[derive(Parser)]
#[command(name = "pollinglab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model config (JSON); `-` reads standard input.
    config: String,
    /// Write the result here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Record wall-clock timestamps in the manifest.
    #[arg(long)]
    timestamps: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic mean delay with its term breakdown.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Override the config's strategy.
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
    },
    /// Discrete-event simulation with 99% batch-means intervals.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of events to simulate.
        #[arg(long, conflicts_with = "time")]
        events: Option<u64>,
        /// Simulated time to cover instead of an event count.
        #[arg(long)]
        time: Option<f64>,
        /// Fraction of the horizon discarded as warmup, in [0, 0.5).
        #[arg(long, default_value_t = 0.1)]
        warmup: f64,
        #[arg(long, default_value_t = 30)]
        batches: usize,
        /// Independent runs with consecutive seeds, pooled.
        #[arg(long, default_value_t = 1)]
        replications: usize,
    },
    /// Whether some waiting beats exhaustive service.
    Check {
        #[command(flatten)]
        common: Common,
        /// Defaults to t2-zero when every timer after the first is zero.
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        /// Comma-separated strategies among II, III and IV.
        #[arg(long, value_delimiter = ',', value_parser = parse_strategy)]
        strategies: Vec<Strategy>,
        /// Confirm each verdict with the timer optimizer.
        #[arg(long)]
        confirm: bool,
    },
    /// Timers minimising the analytic mean delay.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
        #[arg(long, value_enum)]
        search: Option<SearchArg>,
        /// Grid points per axis.
        #[arg(long)]
        grid_points: Option<usize>,
        /// Upper end of the timer grid.
        #[arg(long)]
        upper: Option<f64>,
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Mean delay against T1 for several strategies, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Timer to vary; only t1 is supported.
        #[arg(long, default_value = "t1")]
        param: String,
        /// start:stop:count, both ends included.
        #[arg(long, default_value = "0:5:51")]
        range: String,
        #[arg(long, value_delimiter = ',', value_parser = parse_strategy, default_value = "exhaustive,I,II,III,IV")]
        strategies: Vec<Strategy>,
        /// Seed of the Strategy I simulations.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Events per Strategy I simulation.
        #[arg(long, default_value_t = 1_000_000)]
        events: u64,
    },
    /// Event log of the first events of a simulation.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        events: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    T2Zero,
    Symmetric,
}

#[derive(Clone, Copy, ValueEnum)]
enum SearchArg {
    Both,
    First,
    Equal,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    Strategy::from_label(s)
        .ok_or_else(|| format!("unknown strategy {s:?}; expected exhaustive, I, II, III or IV"))
}

fn emit(common: &Common, text: &str) -> CliResult<()> {
    match &common.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io {
                path: "<stdout>".into(),
                source: e,
            }),
    }
}

fn execute(command: Command) -> CliResult<()> {
    let common = match &command {
        Command::Analyze { common, .. }
        | Command::Simulate { common, .. }
        | Command::Check { common, .. }
        | Command::Optimize { common, .. }
        | Command::Sweep { common, .. }
        | Command::Trace { common, .. } => common,
    };
    let config = LoadedConfig::read(&common.config)?;
    let run = RunOptions {
        timestamps: common.timestamps,
    };
    let text = match &command {
        Command::Analyze { strategy, .. } => {
            commands::to_json(&commands::analyze(&config, *strategy, &run)?)
        }
        Command::Simulate {
            strategy,
            seed,
            events,
            time,
            warmup,
            batches,
            replications,
            ..
        } => {
            let horizon = match (events, time) {
                (_, Some(t)) => Horizon::Time(*t),
                (Some(e), None) => Horizon::Events(*e),
                (None, None) => SimulateOptions::default().horizon,
            };
            let opts = SimulateOptions {
                strategy: *strategy,
                seed: *seed,
                horizon,
                warmup: *warmup,
                batches: *batches,
                replications: *replications,
            };
            commands::to_json(&commands::simulate(&config, &opts, &run)?)
        }
        Command::Check {
            scenario,
            strategies,
            confirm,
            ..
        } => {
            let opts = CheckOptions {
                scenario: scenario.map(|s| match s {
                    ScenarioArg::T2Zero => Scenario::T2Zero,
                    ScenarioArg::Symmetric => Scenario::SymmetricEqualTimers,
                }),
                strategies: strategies.clone(),
                confirm: *confirm,
            };
            commands::to_json(&commands::check(&config, &opts, &run)?)
        }
        Command::Optimize {
            strategy,
            search,
            grid_points,
            upper,
            rel_tol,
            ..
        } => {
            let opts = OptimizeOptions {
                strategy: *strategy,
                search: search.map(|s| match s {
                    SearchArg::Both => TimerSearch::Both,
                    SearchArg::First => TimerSearch::FirstOnly,
                    SearchArg::Equal => TimerSearch::Equal,
                }),
                grid_points: *grid_points,
                upper: *upper,
                rel_tol: *rel_tol,
            };
            commands::to_json(&commands::optimize(&config, &opts, &run)?)
        }
        Command::Sweep {
            param,
            range,
            strategies,
            seed,
            events,
            ..
        } => {
            if !param.eq_ignore_ascii_case("t1") {
                return Err(CliError::Usage(format!(
                    "cannot sweep {param:?}; only t1 is supported"
                )));
            }
            let opts = SweepOptions {
                range: SweepRange::parse(range)?,
                strategies: strategies.clone(),
                seed: *seed,
                events: *events,
            };
            commands::sweep(&config, &opts, &run)?.to_csv()?
        }
        Command::Trace {
            strategy,
            seed,
            events,
            ..
        } => {
            let (manifest, log) = commands::trace(
                &config,
                &TraceOptions {
                    strategy: *strategy,
                    seed: *seed,
                    max_events: *events,
                },
                &run,
            )?;
            commands::trace_text(&manifest, &log)
        }
    };
    emit(common, &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_pool().and_then(|pool| pool.install(|| execute(cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pollinglab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
