//! Command-line driver: runs scenarios, A/B throttling comparisons, and
//! canned trace scenarios, writing deterministic CSV and JSON reports.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simdb_core::config::ScenarioConfig;
use simdb_core::engine::run_simulation;
use simdb_core::{parse_config, report, scenario_config, ConfigError};

#[derive(Parser)]
#[command(
    name = "simdb",
    version,
    about = "Deterministic simulator of DBMS memory governance under compilation throttling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file (strict JSON; unknown keys are fatal).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Replaces the workload seed after the config is resolved.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Directory the report files are written into.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Config override applied after the file is parsed; repeatable.
    /// Dotted keys descend into sections, e.g. `engine.duration_s=600`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write summary.json plus the telemetry CSVs.
    Run(RunArgs),
    /// Run the scenario twice at one seed, throttling on and off, and
    /// write both reports plus compare.json.
    Compare(RunArgs),
    /// Run a canned scenario by name and write its per-task trace.csv.
    Trace {
        /// Canned scenario name (`fig2`).
        scenario: String,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(err)) => {
            eprintln!("simdb: configuration error: {err}");
            ExitCode::from(2)
        }
        Err(Failure::Io(context, err)) => {
            eprintln!("simdb: {context}: {err}");
            ExitCode::from(1)
        }
    }
}

enum Failure {
    Config(ConfigError),
    Io(String, std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(err: ConfigError) -> Failure {
        Failure::Config(err)
    }
}

fn io_context<T>(context: &str, result: std::io::Result<T>) -> Result<T, Failure> {
    result.map_err(|err| Failure::Io(context.into(), err))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args.config, &args.common)?;
            let result = run_simulation(&cfg);
            io_context(
                &format!("writing report to {}", args.common.out.display()),
                report::write_run_report(&result, &args.common.out),
            )?;
            let t = result.totals;
            println!(
                "wrote {} (finished {}, degraded {}, failed_oom {}, failed_timeout {})",
                args.common.out.join("summary.json").display(),
                t.finished(),
                t.completed_degraded,
                t.failed_oom,
                t.failed_timeout
            );
            Ok(())
        }
        Command::Compare(args) => {
            let cfg = load_config(&args.config, &args.common)?;
            let mut throttled_cfg = cfg.clone();
            throttled_cfg.throttling = true;
            let mut unthrottled_cfg = cfg;
            unthrottled_cfg.throttling = false;
            let throttled = run_simulation(&throttled_cfg);
            let unthrottled = run_simulation(&unthrottled_cfg);
            // TODO-CALIBRATION: remove before release.
            if std::env::var_os("SIMDB_CALIBRATION_STATS").is_some() {
                eprintln!(
                    "calibration: mean compile demand throttled {:.0} MB, unthrottled {:.0} MB",
                    throttled.mean_compile_demand_bytes / (1024.0 * 1024.0),
                    unthrottled.mean_compile_demand_bytes / (1024.0 * 1024.0),
                );
            }
            io_context(
                &format!("writing comparison to {}", args.common.out.display()),
                report::write_compare_report(&throttled, &unthrottled, &args.common.out),
            )?;
            println!(
                "wrote {} (throttled finished {}, unthrottled finished {})",
                args.common.out.join("compare.json").display(),
                throttled.totals.finished(),
                unthrottled.totals.finished()
            );
            Ok(())
        }
        Command::Trace { scenario, common } => {
            let mut cfg = scenario_config(&scenario, &common.overrides)?;
            if let Some(seed) = common.seed {
                cfg.workload.seed = seed;
            }
            // The command exists to produce the timeline, whatever the
            // scenario document says.
            cfg.engine.record_trace = true;
            let result = run_simulation(&cfg);
            io_context(
                &format!("creating {}", common.out.display()),
                std::fs::create_dir_all(&common.out),
            )?;
            let path = common.out.join("trace.csv");
            io_context(
                &format!("writing {}", path.display()),
                std::fs::write(&path, report::trace_csv(&result)),
            )?;
            println!("wrote {} ({} events)", path.display(), result.trace.len());
            Ok(())
        }
    }
}

fn load_config(path: &Path, common: &CommonArgs) -> Result<ScenarioConfig, Failure> {
    let text = io_context(&format!("reading {}", path.display()), std::fs::read_to_string(path))?;
    let mut cfg = parse_config(&text, &common.overrides)?;
    if let Some(seed) = common.seed {
        cfg.workload.seed = seed;
    }
    Ok(cfg)
}
