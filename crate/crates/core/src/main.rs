use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twistlab_core::harness::{cmd_barrier, cmd_destroy, cmd_norms, cmd_orbit, load_config, HarnessError, Report};

#[derive(Parser)]
#[command(name = "twistlab", version, about = "Destruction experiments for twist-map invariant circles")]
struct Cli {
    /// key=value config file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Solver tolerance (overrides `tol` in the config).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Periodic and connecting minimizers.
    Orbit,
    /// Barrier profiles and destruction certificates.
    Barrier,
    /// The destruction pipeline along convergents of omega.
    Destroy,
    /// Derivative sup, C^r and Cauchy-bound tables.
    Norms,
}

fn run(cli: &Cli) -> Result<Report, HarnessError> {
    if let Some(k) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .map_err(|e| HarnessError::Config(format!("workers: {e}")))?;
    }
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(tol) = cli.tol {
        cfg.set_tol(tol)?;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.display().to_string());
    }
    match cli.command {
        Command::Orbit => cmd_orbit(&cfg),
        Command::Barrier => cmd_barrier(&cfg),
        Command::Destroy => cmd_destroy(&cfg),
        Command::Norms => cmd_norms(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for c in &report.checks {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                println!("{mark} {} [{}] {}", c.name, c.source, c.detail);
            }
            for f in &report.flags {
                println!("note {f}");
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("twistlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
