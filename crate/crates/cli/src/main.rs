use std::process::ExitCode;

use clap::Parser;
use cobolassist_cli::args::{Cli, Command};
use cobolassist_cli::{cmd_ablate, cmd_classify, cmd_eval, cmd_inspect, cmd_report, CliError, RunConfig};
use tracing_subscriber::EnvFilter;

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Inspect { benchmark } => {
            for line in cmd_inspect(&benchmark)? {
                println!("{line}");
            }
        }
        Command::Eval(args) => {
            let cfg = RunConfig::resolve(&args)?;
            let r = cmd_eval(&cfg)?;
            println!(
                "{} tasks, {} compiled, {} solved: CSR {}%, pass@1 {}%, errors {} -> {} ({}%), avg iterations {}",
                r.n_tasks,
                r.n_compiled,
                r.n_solved,
                r.csr_percent,
                r.pass_at_1_percent,
                r.errors_before,
                r.errors_after,
                r.error_reduction_percent,
                r.avg_iterations
            );
            println!("reports written to {}", cfg.run_dir.display());
        }
        Command::Classify { log, source } => {
            for line in cmd_classify(&log, &source)? {
                println!("{line}");
            }
        }
        Command::Ablate { run, budgets } => {
            let cfg = RunConfig::resolve(&run)?;
            let (_, combined) = cmd_ablate(&cfg, &budgets)?;
            for row in &combined.sweep {
                println!(
                    "budget {}: CSR {}%, pass@1 {}%, {:.3}s",
                    row.max_iterations, row.csr_percent, row.pass_at_1_percent, row.total_time_s
                );
            }
        }
        Command::Report { input, format, output } => {
            let text = cmd_report(&input, &format)?;
            match output {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| CliError::Environment(format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
