use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cobolassist_core::evalkit::ReportFormat;
use cobolassist_core::llm::{API_KEY_ENV, DEFAULT_ENDPOINT};
use cobolassist_core::repairloop::{RepairMode, DEFAULT_MAX_ITERATIONS};
use serde::Deserialize;

use crate::args::RunArgs;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Remote,
    Replay,
    Scripted,
}

impl FromStr for BackendKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "remote" => Ok(BackendKind::Remote),
            "replay" => Ok(BackendKind::Replay),
            "scripted" => Ok(BackendKind::Scripted),
            other => Err(CliError::Config(format!("unknown backend `{other}` (remote, replay, scripted)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToolchainKind {
    GnuCobol,
    Replay,
}

impl FromStr for ToolchainKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "gnucobol" => Ok(ToolchainKind::GnuCobol),
            "replay" => Ok(ToolchainKind::Replay),
            other => Err(CliError::Config(format!("unknown toolchain `{other}` (gnucobol, replay)"))),
        }
    }
}

/// Settings accepted from a TOML file. Credentials are deliberately not
/// among them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub benchmark: Option<PathBuf>,
    pub backend: Option<String>,
    pub model: Option<String>,
    pub mode: Option<String>,
    pub max_iterations: Option<u32>,
    pub run_dir: Option<PathBuf>,
    pub compiler: Option<PathBuf>,
    pub concurrency: Option<usize>,
    pub format: Option<Vec<String>>,
    pub session: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub toolchain: Option<String>,
    pub toolchain_session: Option<PathBuf>,
    pub record_toolchain: Option<PathBuf>,
    pub initial_replies: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub const DEFAULT_MODEL: &str = "gpt-4o";
pub const DEFAULT_CONCURRENCY: usize = 4;

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub benchmark_path: PathBuf,
    pub backend_kind: BackendKind,
    pub model_name: String,
    pub mode: RepairMode,
    pub max_iterations: u32,
    pub run_dir: PathBuf,
    pub compiler_path: PathBuf,
    pub concurrency: usize,
    pub formats: Vec<ReportFormat>,
    pub session: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub endpoint: String,
    pub toolchain: ToolchainKind,
    pub toolchain_session: Option<PathBuf>,
    pub record_toolchain: Option<PathBuf>,
    pub initial_replies: Option<PathBuf>,
}

fn pick<T>(cli: Option<T>, file: Option<T>) -> Option<T> {
    cli.or(file)
}

impl RunConfig {
    /// Layers flags and environment (already merged by the parser) over
    /// the config file and built-in defaults, then validates.
    pub fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let a = args.clone();
        let benchmark_path = pick(a.benchmark, file.benchmark)
            .ok_or_else(|| CliError::Config("--benchmark is required".into()))?;
        let backend_kind: BackendKind = pick(a.backend, file.backend).as_deref().unwrap_or("remote").parse()?;
        let mode = pick(a.mode, file.mode)
            .as_deref()
            .unwrap_or("compiler_feedback")
            .parse::<RepairMode>()
            .map_err(CliError::Config)?;
        let formats = if !a.format.is_empty() {
            a.format
        } else {
            file.format.unwrap_or_default()
        };
        let formats = if formats.is_empty() {
            ReportFormat::ALL.to_vec()
        } else {
            formats
                .iter()
                .map(|f| f.parse::<ReportFormat>().map_err(CliError::Config))
                .collect::<Result<_, _>>()?
        };
        let cfg = RunConfig {
            benchmark_path,
            backend_kind,
            model_name: pick(a.model, file.model).unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            mode,
            max_iterations: pick(a.max_iterations, file.max_iterations).unwrap_or(DEFAULT_MAX_ITERATIONS),
            run_dir: pick(a.run_dir, file.run_dir).unwrap_or_else(|| PathBuf::from("runs/latest")),
            compiler_path: pick(a.compiler, file.compiler).unwrap_or_else(|| PathBuf::from("cobc")),
            concurrency: pick(a.concurrency, file.concurrency).unwrap_or(DEFAULT_CONCURRENCY),
            formats,
            session: pick(a.session, file.session),
            record: pick(a.record, file.record),
            endpoint: pick(a.endpoint, file.endpoint).unwrap_or_else(|| DEFAULT_ENDPOINT.to_string()),
            toolchain: pick(a.toolchain, file.toolchain).as_deref().unwrap_or("gnucobol").parse()?,
            toolchain_session: pick(a.toolchain_session, file.toolchain_session),
            record_toolchain: pick(a.record_toolchain, file.record_toolchain),
            initial_replies: pick(a.initial_replies, file.initial_replies),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.concurrency == 0 {
            return Err(CliError::Config("concurrency must be positive".into()));
        }
        match self.backend_kind {
            BackendKind::Replay | BackendKind::Scripted if self.session.is_none() => {
                return Err(CliError::Config("replay and scripted backends need --session".into()));
            }
            BackendKind::Remote if std::env::var(API_KEY_ENV).map_or(true, |v| v.is_empty()) => {
                return Err(CliError::Config(format!("remote backend needs the {API_KEY_ENV} environment variable")));
            }
            _ => {}
        }
        if self.toolchain == ToolchainKind::Replay && self.toolchain_session.is_none() {
            return Err(CliError::Config("replay toolchain needs --toolchain-session".into()));
        }
        if self.run_dir.exists() {
            let non_empty = fs::read_dir(&self.run_dir)
                .map_err(|e| CliError::Config(format!("{}: {e}", self.run_dir.display())))?
                .next()
                .is_some();
            if non_empty {
                return Err(CliError::Config(format!("run directory {} is not empty", self.run_dir.display())));
            }
        }
        Ok(())
    }
}
