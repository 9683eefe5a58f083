use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fris_im::harness::{self, selftest, ExperimentConfig, Failure, ResultTable};
use fris_im::Error;

#[derive(Parser)]
#[command(name = "fris", version, about = "Response-aware index codebooks for fluid-RIS index modulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build candidates, responses and codebooks from a config.
    Design(RunArgs),
    /// BER against SNR for every configured method.
    Ber(RunArgs),
    /// Net throughput for every configured granularity.
    Sweep(RunArgs),
    /// BER comparison of codebook methods (built-in scenario A).
    ReproA(RunArgs),
    /// Granularity throughput tradeoff (built-in scenario B).
    ReproB(RunArgs),
    /// Run the oracle self-checks.
    Selftest(ThreadArgs),
}

#[derive(Args)]
struct ThreadArgs {
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Config file (`key = value` lines). Built-in scenarios use it as an overlay.
    #[arg(long)]
    config: Option<PathBuf>,
    /// First channel seed; the configured seed count is kept.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `output.dir` from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<u64>,
    #[command(flatten)]
    threads: ThreadArgs,
}

impl RunArgs {
    fn config(&self, base: ExperimentConfig) -> Result<(ExperimentConfig, PathBuf), Error> {
        let mut cfg = match &self.config {
            Some(path) => base.overlay_file(path)?,
            None => base,
        };
        if let Some(s) = self.seed {
            let n = cfg.seeds.len().max(1) as u64;
            cfg.seeds = (s..s.saturating_add(n)).collect();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        let out = self.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
        Ok((cfg, out))
    }
}

fn set_threads(t: &ThreadArgs) -> Result<(), Error> {
    if let Some(n) = t.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn report(table: &ResultTable, out: &Path) {
    println!("{}: {} rows written under {}", table.schema, table.rows.len(), out.display());
}

/// Partial runs still succeed as a whole, but the exit code reflects the
/// first failed combination.
fn finish(failures: &[Failure]) -> ExitCode {
    for f in failures {
        eprintln!("failed stage `{}` ({}): {}", f.stage, f.params, f.error);
    }
    match failures.first() {
        Some(f) => ExitCode::from(harness::exit_code(&f.error) as u8),
        None => ExitCode::SUCCESS,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Design(a) => {
            set_threads(&a.threads)?;
            let (cfg, out) = a.config(ExperimentConfig::default())?;
            let (table, failures) = harness::design(&cfg, &out)?;
            report(&table, &out);
            Ok(finish(&failures))
        }
        Command::Ber(a) => {
            set_threads(&a.threads)?;
            let (cfg, out) = a.config(ExperimentConfig::default())?;
            let run = harness::ber(&cfg, &out)?;
            report(&run.ber, &out);
            Ok(finish(&run.failures))
        }
        Command::Sweep(a) => {
            set_threads(&a.threads)?;
            let (cfg, out) = a.config(ExperimentConfig::default())?;
            let run = harness::sweep(&cfg, &out)?;
            report(&run.throughput, &out);
            Ok(finish(&run.failures))
        }
        Command::ReproA(a) => {
            set_threads(&a.threads)?;
            let (cfg, out) = a.config(harness::scenario_a_config())?;
            let (table, run) = harness::reproduce_scenario_a_with(&cfg, &out)?;
            report(&table, &out);
            Ok(finish(&run.failures))
        }
        Command::ReproB(a) => {
            set_threads(&a.threads)?;
            let (cfg, out) = a.config(harness::scenario_b_config())?;
            let (table, run) = harness::reproduce_scenario_b_with(&cfg, &out)?;
            report(&table, &out);
            Ok(finish(&run.failures))
        }
        Command::Selftest(t) => {
            set_threads(&t)?;
            let checks = selftest::selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
