//! `fogcache`: run, sweep, and inspect cache placement simulations.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, bad config, bad
//! axis values), 2 runtime invariant violation or failed self-check,
//! 3 I/O error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fogcache_core::config::{ConfigError, SystemConfig};
use fogcache_core::demand::PopularityModel;
use fogcache_core::harness::{
    bound_at, bound_params, queue_bound_numerator, run_simulation, sweep, write_series_csv,
    write_summary_csv, RunOptions, SimError, SweepAxis, SweepError,
};
use fogcache_core::oracle::r_star;
use fogcache_core::verify;

#[derive(Parser)]
#[command(name = "fogcache", version, about = "Deterministic fog cache placement simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one simulation and write its checkpoint series CSV.
    Run {
        /// TOML system configuration.
        #[arg(long)]
        config: PathBuf,
        /// Directory for series.csv (created if missing).
        #[arg(long)]
        out_dir: PathBuf,
        /// Override all three stream seeds with one value. Streams stay
        /// independent even with equal seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the checkpoint stride from the config.
        #[arg(long)]
        checkpoint_stride: Option<u64>,
        /// Also write the demand actually used to this CSV file.
        #[arg(long)]
        export_trace: Option<PathBuf>,
        /// Replay demand from this CSV file instead of sampling.
        #[arg(long)]
        import_trace: Option<PathBuf>,
    },
    /// Run a grid over one parameter axis and write summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of: v, horizon, h-min, budget, policy.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values, e.g. 10,20,30.
        #[arg(long)]
        values: String,
        /// Number of paired seed offsets per value.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the stationary benchmark for a configuration.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the randomized self-check suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{0}: {1}")]
    Io(&'static str, std::io::Error),
    #[error("unknown axis {0:?} (expected v, horizon, h-min, budget, or policy)")]
    BadAxis(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Io { .. }) => 3,
            CliError::Config(_) => 1,
            CliError::Sim(SimError::Io(_)) => 3,
            CliError::Sim(_) => 2,
            CliError::Sweep(SweepError::BadValue { .. }) => 1,
            CliError::Sweep(SweepError::Config(ConfigError::Io { .. })) => 3,
            CliError::Sweep(SweepError::Config(_)) => 1,
            CliError::Sweep(SweepError::Sim(SimError::Io(_))) => 3,
            CliError::Sweep(SweepError::Sim(_)) => 2,
            CliError::Io(..) => 3,
            CliError::BadAxis(_) => 1,
        }
    }
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    stride: Option<u64>,
) -> Result<fogcache_core::ValidConfig, CliError> {
    let mut raw = SystemConfig::load(path)?;
    if let Some(s) = seed {
        raw.seeds.demand = s;
        raw.seeds.history = s;
        raw.seeds.policy = s;
    }
    if let Some(st) = stride {
        raw.run.checkpoint_stride = st;
    }
    let validated = raw.validate()?;
    for w in &validated.warnings {
        eprintln!("warning: {w}");
    }
    Ok(validated.config)
}

fn real_main(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Run { config, out_dir, seed, checkpoint_stride, export_trace, import_trace } => {
            let cfg = load_config(&config, seed, checkpoint_stride)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io("creating out dir", e))?;
            let record =
                run_simulation(&cfg, &RunOptions { export_trace, import_trace })?;
            let series_path = out_dir.join("series.csv");
            let mut buf = Vec::new();
            write_series_csv(&mut buf, cfg.n_nodes(), &record)
                .map_err(|e| CliError::Io("formatting series", e))?;
            std::fs::write(&series_path, buf).map_err(|e| CliError::Io("writing series.csv", e))?;
            let params = bound_params(&cfg);
            println!("config_hash={}", record.config_hash);
            println!("r_star={}", record.r_star);
            if let Some(t) = record.terminal() {
                println!(
                    "terminal slot={} total_reward_avg={} regret_expected={} regret_realized={} bound={}",
                    t.slot,
                    t.total_reward_avg,
                    t.regret_expected,
                    t.regret_realized,
                    bound_at(&params, t.slot, cfg.v_param(), cfg.h_min()),
                );
            }
            println!("series written to {}", series_path.display());
            Ok(())
        }
        Cmd::Sweep { config, axis, values, seeds, out_dir } => {
            let raw = SystemConfig::load(&config)?;
            let axis = SweepAxis::parse(&axis).ok_or(CliError::BadAxis(axis))?;
            let values: Vec<String> =
                values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            let rows = sweep(&raw, axis, &values, seeds)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io("creating out dir", e))?;
            let n_nodes = raw.node.len();
            let mut buf = Vec::new();
            write_summary_csv(&mut buf, n_nodes, &rows)
                .map_err(|e| CliError::Io("formatting summary", e))?;
            let path = out_dir.join("summary.csv");
            std::fs::write(&path, buf).map_err(|e| CliError::Io("writing summary.csv", e))?;
            println!("{} runs; summary written to {}", rows.len(), path.display());
            Ok(())
        }
        Cmd::Oracle { config } => {
            let cfg = load_config(&config, None, None)?;
            let model = PopularityModel::from_config(&cfg).map_err(SimError::from)?;
            let result = r_star(&cfg, &model).map_err(SimError::from)?;
            println!("r_star_total={}", result.total);
            for (n, node) in result.nodes.iter().enumerate() {
                let mut line = format!("node_{} value={}", n + 1, node.value);
                if let Some(mix) = &node.mixture {
                    let support: Vec<String> = mix
                        .support
                        .iter()
                        .map(|(mask, p)| format!("{mask:#x}:{p}"))
                        .collect();
                    line.push_str(&format!(" support={}", support.join(",")));
                }
                println!("{line}");
            }
            let params = bound_params(&cfg);
            println!("b_const={}", params.b_const);
            println!("gamma={}", params.gamma);
            println!(
                "queue_bound_numerator={}",
                queue_bound_numerator(&params, cfg.v_param())
            );
            if cfg.horizon() >= 1 {
                println!(
                    "bound_terminal={}",
                    bound_at(&params, cfg.horizon(), cfg.v_param(), cfg.h_min())
                );
            }
            Ok(())
        }
        Cmd::Verify { seed } => {
            let reports = verify::run_all(seed);
            let mut all_ok = true;
            let mut out = std::io::stdout().lock();
            for r in &reports {
                let status = if r.passed() { "ok" } else { "FAILED" };
                writeln!(out, "{status} {} ({} cases)", r.name, r.cases)
                    .map_err(|e| CliError::Io("writing report", e))?;
                for f in &r.failures {
                    writeln!(out, "    {f}").map_err(|e| CliError::Io("writing report", e))?;
                }
                all_ok &= r.passed();
            }
            drop(out);
            if all_ok {
                Ok(())
            } else {
                // Counterexamples were already printed above; a failed
                // self-check is a runtime property violation.
                std::process::exit(2);
            }
        }
    }
}

fn main() -> ExitCode {
    // Flag and subcommand mistakes are validation errors (exit 1), while
    // help and version output exit 0; clap's default of 2 is reserved for
    // runtime invariant violations.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
