use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cobolassist", version, about = "Generate, repair and evaluate COBOL programs with compiler feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the tasks of a benchmark.
    Inspect {
        #[arg(long, env = "COBOLASSIST_BENCHMARK")]
        benchmark: PathBuf,
    },
    /// Generate, repair and test every task, then write reports.
    Eval(RunArgs),
    /// Classify the errors of a compiler log against its source.
    Classify {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        source: PathBuf,
    },
    /// Evaluate several repair budgets and emit a sweep.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated iteration budgets.
        #[arg(long, value_delimiter = ',', default_value = "0,1,3,5")]
        budgets: Vec<u32>,
    },
    /// Re-render a saved report.json.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: String,
        /// Write here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Run settings. Unset values fall back to the config file, then defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with defaults for any of the options below.
    #[arg(long, env = "COBOLASSIST_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "COBOLASSIST_BENCHMARK")]
    pub benchmark: Option<PathBuf>,
    /// remote, replay or scripted.
    #[arg(long, env = "COBOLASSIST_BACKEND")]
    pub backend: Option<String>,
    #[arg(long, env = "COBOLASSIST_MODEL")]
    pub model: Option<String>,
    /// none, zero_shot or compiler_feedback.
    #[arg(long, env = "COBOLASSIST_MODE")]
    pub mode: Option<String>,
    #[arg(long, env = "COBOLASSIST_MAX_ITERATIONS")]
    pub max_iterations: Option<u32>,
    #[arg(long, env = "COBOLASSIST_RUN_DIR")]
    pub run_dir: Option<PathBuf>,
    /// Path of the cobc executable.
    #[arg(long, env = "COBOLASSIST_COBC")]
    pub compiler: Option<PathBuf>,
    #[arg(long, env = "COBOLASSIST_CONCURRENCY")]
    pub concurrency: Option<usize>,
    /// Report formats to write: json, markdown, csv. Defaults to all.
    #[arg(long, value_delimiter = ',')]
    pub format: Vec<String>,
    /// Recorded LLM session (replay) or JSON list of replies (scripted).
    #[arg(long, env = "COBOLASSIST_SESSION")]
    pub session: Option<PathBuf>,
    /// Append every remote exchange to this session file.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Chat-completions URL for the remote backend.
    #[arg(long, env = "COBOLASSIST_ENDPOINT")]
    pub endpoint: Option<String>,
    /// gnucobol or replay.
    #[arg(long, env = "COBOLASSIST_TOOLCHAIN")]
    pub toolchain: Option<String>,
    /// Recorded compiler session for the replay toolchain.
    #[arg(long, env = "COBOLASSIST_TOOLCHAIN_SESSION")]
    pub toolchain_session: Option<PathBuf>,
    /// Append every compile and run to this session file.
    #[arg(long)]
    pub record_toolchain: Option<PathBuf>,
    /// JSON object mapping task id to an externally produced first reply.
    #[arg(long)]
    pub initial_replies: Option<PathBuf>,
}
