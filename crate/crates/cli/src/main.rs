//! `lmce`: batch driver for solves, verification suites and sweeps.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 the solver did not
//! converge, 3 invalid input.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use run::{Failure, RunReport, EXIT_INVALID};

#[derive(Debug, Parser)]
#[command(name = "lmce", version, about = "Numerical laboratory for the 2D Lagrangian mean curvature equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Newton solve of a manufactured Dirichlet problem.
    Solve(RunArgs),
    /// Identity and inequality checks on a manufactured, solved or loaded field.
    Verify(RunArgs),
    /// Tabulate fitted constants over a parameter.
    Sweep(RunArgs),
    /// Merge the CSV tables of an output directory into report.csv.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Config whose `out` directory is merged.
    #[arg(long, required_unless_present = "out")]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(config).map_err(Failure::invalid)?;
    if let Some(out) = out {
        cfg.out = out;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(Failure::invalid)?;
    Ok(cfg)
}

fn print_report(r: &RunReport) {
    if let Some(s) = &r.solve {
        println!(
            "solve {}: n={} converged={} iterations={} residual={:.3e}{}",
            s.problem,
            s.n,
            s.state.converged,
            s.iterations,
            s.certified_residual,
            s.error_u.map(|e| format!(" error_u={e:.3e}")).unwrap_or_default()
        );
    }
    for (name, entry) in &r.checks {
        println!("{} {name}", if entry.pass() { "PASS" } else { "FAIL" });
    }
    println!("wrote {} files to {}", r.files.len(), r.config.out.display());
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    type Cmd = fn(&RunConfig) -> Result<RunReport, Failure>;
    let (cfg, cmd): (RunConfig, Cmd) = match cli.command {
        Command::Solve(a) => (load(&a.config, a.out, a.seed)?, run::cmd_solve),
        Command::Verify(a) => (load(&a.config, a.out, a.seed)?, run::cmd_verify),
        Command::Sweep(a) => (load(&a.config, a.out, a.seed)?, run::cmd_sweep),
        Command::Report(a) => {
            let dir = match (a.out, a.config) {
                (Some(out), _) => out,
                (None, Some(config)) => load(&config, None, a.seed)?.out,
                (None, None) => unreachable!("clap requires one of --config and --out"),
            };
            return run::cmd_report(&dir);
        }
    };
    let report = cmd(&cfg)?;
    print_report(&report);
    Ok(report.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
