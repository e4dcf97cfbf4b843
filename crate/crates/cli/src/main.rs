//! `maxlab` — run maximal-function and weight experiments from a config.
//!
//! Exit codes: 0 when every pass-mode check passes, 1 when any fails,
//! 2 for configuration, usage or output errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxlab_cli::config::{parse_config, ExperimentConfig, Format};
use maxlab_cli::report::{emit_report, RunReport};
use maxlab_cli::runner::{run_experiment, summary_lines, Command};
use maxlab_core::Status;

#[derive(Parser)]
#[command(
    name = "maxlab",
    version,
    about = "Discretized maximal-function and weight experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment config (TOML, or JSON for a `.json` path). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "MAXLAB_OUT_DIR")]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Weight constants over the refinement ladder.
    Constants,
    /// The configured checks (all when none are listed).
    Check,
    /// Search for the smallest lambda0 with worst ratio at most 2.
    SearchLambda0,
    /// ||M(Mf)|| / ||Mf|| across the refinement ladder.
    WpRatio,
    /// Nondegeneracy of the Hilbert kernel.
    Nondegen,
    /// Re-emit a saved JSON report.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn fail_usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("maxlab: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            return fail_usage(e);
        }
    }

    let report = match &cli.command {
        Cmd::Report { input } => {
            let text = match std::fs::read_to_string(input) {
                Ok(t) => t,
                Err(e) => return fail_usage(format!("cannot read {}: {e}", input.display())),
            };
            match RunReport::from_json(&text) {
                Ok(r) => r,
                Err(e) => return fail_usage(format!("malformed report {}: {e}", input.display())),
            }
        }
        cmd => {
            let mut cfg = match &cli.config {
                Some(p) => match parse_config(p) {
                    Ok(c) => c,
                    Err(e) => return fail_usage(e),
                },
                None => ExperimentConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Err(e) = cfg.validate() {
                return fail_usage(e);
            }
            let command = match cmd {
                Cmd::Constants => Command::Constants,
                Cmd::Check => Command::Check,
                Cmd::SearchLambda0 => Command::SearchLambda0,
                Cmd::WpRatio => Command::WpRatio,
                Cmd::Nondegen => Command::Nondegen,
                Cmd::Report { .. } => unreachable!(),
            };
            run_experiment(&cfg, command)
        }
    };

    let dir = cli
        .out
        .clone()
        .or_else(|| report.config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("maxlab-out"));
    let format = cli
        .format
        .or(report.config.output.format)
        .unwrap_or(Format::Csv);
    match emit_report(&report, &dir, format) {
        Ok(paths) => {
            for line in summary_lines(&report) {
                println!("{line}");
            }
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
        }
        Err(e) => return fail_usage(format!("cannot write to {}: {e}", dir.display())),
    }
    if report.status == Status::Fail {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
