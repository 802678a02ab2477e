use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crane_core::checks::SUITE;
use crane_core::config::{load_config, RunConfig};
use crane_core::pipeline::{fmt_f64, run_kernels_stage, run_pipeline, Summary};
use crane_core::CraneError;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Finite-time boundary control of an overhead crane with a flexible cable.
#[derive(Parser)]
#[command(name = "crane", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Key-value configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `out_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute kernels and gains, then stop.
    Kernels(Common),
    /// Run the full pipeline and write every artifact.
    Simulate(Common),
    /// Run the property suite and print one PASS/FAIL line per check.
    Check(Common),
}

fn exit_code(e: &CraneError) -> u8 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// Any failure while loading the configuration, including a missing file,
/// counts as a configuration error.
fn resolve(common: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let cfg = match &common.config {
        Some(p) => load_config(p).map_err(|e| Failure(e, EXIT_CONFIG))?,
        None => RunConfig::default(),
    };
    let out = common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, out))
}

struct Failure(CraneError, u8);

impl From<CraneError> for Failure {
    fn from(e: CraneError) -> Self {
        let code = exit_code(&e);
        Failure(e, code)
    }
}

fn report(summary: &Summary, files: &[PathBuf], out: &Path) {
    println!("mu = {}", fmt_f64(summary.mu));
    println!("a0 = {}", fmt_f64(summary.a0));
    println!("cfl_ratio = {}", fmt_f64(summary.cfl_ratio));
    let opt = |v: Option<f64>| v.map_or_else(|| "not reached".to_string(), fmt_f64);
    if summary.t0_observed.is_some() || summary.t1_observed.is_some() {
        println!("T0_observed = {}", opt(summary.t0_observed));
        println!("T1_observed = {}", opt(summary.t1_observed));
    }
    println!("wrote {} files to {}", files.len(), out.display());
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Kernels(common) => {
            let (cfg, out) = resolve(&common)?;
            let (summary, files) = run_kernels_stage(&cfg, &out)?;
            report(&summary, &files, &out);
            Ok(0)
        }
        Command::Simulate(common) => {
            let (cfg, out) = resolve(&common)?;
            let (summary, files) = run_pipeline(&cfg, &out)?;
            report(&summary, &files, &out);
            Ok(0)
        }
        Command::Check(common) => {
            let (_, out) = resolve(&common)?;
            let scratch = out.join("check");
            let mut failed = 0;
            for (name, check) in SUITE {
                match check(&scratch) {
                    Ok(outcome) => {
                        println!("{}", outcome.line());
                        failed += usize::from(!outcome.passed);
                    }
                    Err(e) => {
                        println!("FAIL {name}: {e}");
                        failed += 1;
                    }
                }
            }
            println!("{} of {} checks passed", SUITE.len() - failed, SUITE.len());
            Ok(if failed == 0 { 0 } else { EXIT_NUMERICAL })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(e, code)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
