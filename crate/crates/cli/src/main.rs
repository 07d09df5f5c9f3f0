//! Batch driver for the fractional obstacle laboratory.
//!
//! Every subcommand reads a JSON run configuration (or a previous manifest),
//! writes its artifacts into the output directory and records a manifest
//! `manifest.<command>.json` with the config hash, versions, seed and the
//! digests of all inputs and outputs.

mod commands;
mod error;
mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::SweepParam;
use error::{CliError, CliResult};
use manifest::{load_config, Manifest};

#[derive(Debug, Parser)]
#[command(name = "fracfb", version, about = "Fractional obstacle problem laboratory")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Run configuration (JSON), or a manifest of an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to RAYON_NUM_THREADS or the logical core count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct FieldArg {
    /// Field binary from `solve`; the sidecar is the same path with a `.json` extension.
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the obstacle problem and write the field, sidecar and trace CSV.
    Solve,
    /// Radial diagnostics CSVs at every free boundary point.
    Analyze(FieldArg),
    /// Free boundary report (JSON).
    Classify(FieldArg),
    /// Optimal stopping estimates (CSV) and martingale checks.
    Mc(FieldArg),
    /// Contact set size over a parameter range.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 9)]
        steps: usize,
        /// Geometric instead of uniform spacing.
        #[arg(long)]
        log: bool,
        /// Bisection steps once a collapse of the contact set is bracketed.
        #[arg(long, default_value_t = 12)]
        bisect_iters: usize,
    },
    /// Run the built-in invariant suite.
    Selftest,
}

fn field_path(arg: &FieldArg, out: &Path) -> PathBuf {
    arg.field.clone().unwrap_or_else(|| out.join("field.bin"))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(k) = cli.global.threads {
        if k == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }

    if let Command::Selftest = cli.command {
        let report = commands::selftest();
        let failed = report.failures().len();
        println!("{} checks, {} failed", report.checks.len(), failed);
        if let Some(out) = &cli.global.out {
            std::fs::create_dir_all(out)?;
            std::fs::write(out.join("selftest.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        }
        return if failed == 0 { Ok(()) } else { Err(CliError::SelftestFailed(failed)) };
    }

    let mut cfg = load_config(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.global.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out)?;

    let (name, args, artifacts) = match &cli.command {
        Command::Solve => ("solve", json!({}), commands::solve(&cfg, &out)?),
        Command::Analyze(f) => {
            let p = field_path(f, &out);
            ("analyze", json!({ "field": p }), commands::analyze(&cfg, &p, &out)?)
        }
        Command::Classify(f) => {
            let p = field_path(f, &out);
            ("classify", json!({ "field": p }), commands::classify(&cfg, &p, &out)?)
        }
        Command::Mc(f) => {
            let p = field_path(f, &out);
            ("mc", json!({ "field": p }), commands::mc(&cfg, &p, &out)?)
        }
        Command::Sweep {
            param,
            from,
            to,
            steps,
            log,
            bisect_iters,
        } => {
            let values = commands::sweep_values(*from, *to, *steps, *log)?;
            let args = json!({
                "param": param, "from": from, "to": to, "steps": steps,
                "log": log, "bisect_iters": bisect_iters,
            });
            ("sweep", args, commands::sweep(&cfg, *param, &values, *bisect_iters, &out)?)
        }
        Command::Selftest => unreachable!(),
    };
    let manifest = Manifest::new(name, args, &cfg, &artifacts.inputs, &artifacts.outputs)?;
    let path = manifest.write(&out)?;
    for p in artifacts.outputs.iter().chain([&path]) {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
