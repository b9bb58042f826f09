//! Command implementations behind the `cobolassist` binary.

pub mod args;
pub mod config;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cobolassist_core::benchmark::{load_benchmark, Task};
use cobolassist_core::compiler::{parse_diagnostics, GnuCobol, RecordingToolchain, ReplayToolchain, Toolchain};
use cobolassist_core::evalkit::{
    build_report, emit_report, render, run_suite, EvalError, EvalReport, ReportFormat, SweepRow, TaskResult,
    TEST_TIMEOUT,
};
use cobolassist_core::llm::{Backend, Recorder, RecordingBackend, RemoteBackend, ReplayBackend, ScriptedBackend};
use cobolassist_core::repairloop::{LoopEnv, RepairConfig};
use cobolassist_core::taxonomy::Classifier;
use thiserror::Error;
use tracing::info;

pub use config::{BackendKind, RunConfig, ToolchainKind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("environment error: {0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Environment(_) => 3,
        }
    }
}

fn env_err(e: impl std::fmt::Display) -> CliError {
    CliError::Environment(e.to_string())
}

pub fn build_backend(cfg: &RunConfig) -> Result<Box<dyn Backend>, CliError> {
    let inner: Box<dyn Backend> = match cfg.backend_kind {
        BackendKind::Replay => {
            let path = cfg.session.as_deref().expect("validated");
            Box::new(ReplayBackend::open(path).map_err(|e| CliError::Config(e.to_string()))?)
        }
        BackendKind::Scripted => {
            let path = cfg.session.as_deref().expect("validated");
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let replies: Vec<String> =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Box::new(ScriptedBackend::new(replies))
        }
        BackendKind::Remote => Box::new(
            RemoteBackend::from_env(cfg.endpoint.clone())
                .map_err(|e| CliError::Config(e.to_string()))?
                .with_max_in_flight(cfg.concurrency),
        ),
    };
    match &cfg.record {
        Some(path) => {
            let recorder = Recorder::create(path).map_err(|e| CliError::Config(e.to_string()))?;
            Ok(Box::new(RecordingBackend::new(inner, recorder)))
        }
        None => Ok(inner),
    }
}

pub fn build_toolchain(cfg: &RunConfig) -> Result<Arc<dyn Toolchain>, CliError> {
    let inner: Arc<dyn Toolchain> = match cfg.toolchain {
        ToolchainKind::GnuCobol => {
            let cobc = GnuCobol::new(&cfg.compiler_path);
            let version = cobc.version().map_err(env_err)?;
            info!(%version, "using compiler");
            Arc::new(cobc)
        }
        ToolchainKind::Replay => {
            let path = cfg.toolchain_session.as_deref().expect("validated");
            Arc::new(ReplayToolchain::open(path).map_err(|e| CliError::Config(e.to_string()))?)
        }
    };
    match &cfg.record_toolchain {
        Some(path) => Ok(Arc::new(RecordingToolchain::new(inner, path).map_err(env_err)?)),
        None => Ok(inner),
    }
}

fn load_tasks(cfg: &RunConfig) -> Result<Vec<Task>, CliError> {
    load_benchmark(&cfg.benchmark_path).map_err(|e| CliError::Config(e.to_string()))
}

fn load_initial(cfg: &RunConfig) -> Result<Option<HashMap<String, String>>, CliError> {
    let Some(path) = &cfg.initial_replies else { return Ok(None) };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn repair_config(cfg: &RunConfig, max_iterations: u32) -> RepairConfig {
    RepairConfig { max_iterations, mode: cfg.mode, model_name: cfg.model_name.clone(), ..RepairConfig::default() }
}

fn effective_concurrency(cfg: &RunConfig) -> usize {
    // Scripted replies are consumed in call order, which only makes sense
    // with a single worker.
    if cfg.backend_kind == BackendKind::Scripted {
        1
    } else {
        cfg.concurrency
    }
}

struct Prepared {
    tasks: Vec<Task>,
    backend: Box<dyn Backend>,
    toolchain: Arc<dyn Toolchain>,
    classifier: Classifier,
    initial: Option<HashMap<String, String>>,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let tasks = load_tasks(cfg)?;
    let initial = load_initial(cfg)?;
    let backend = build_backend(cfg)?;
    let toolchain = build_toolchain(cfg)?;
    Ok(Prepared { tasks, backend, toolchain, classifier: Classifier::default(), initial })
}

fn run_at(p: &Prepared, cfg: &RunConfig, run_dir: &Path, max_iterations: u32) -> Result<Vec<TaskResult>, CliError> {
    fs::create_dir_all(run_dir).map_err(|e| env_err(format!("{}: {e}", run_dir.display())))?;
    let env = LoopEnv { toolchain: p.toolchain.as_ref(), classifier: &p.classifier, run_dir };
    let rc = repair_config(cfg, max_iterations);
    run_suite(
        &p.tasks,
        p.backend.as_ref(),
        env,
        &rc,
        effective_concurrency(cfg),
        p.initial.as_ref(),
        TEST_TIMEOUT,
    )
    .map_err(|e| match e {
        EvalError::Repair(r) => CliError::Environment(r.to_string()),
        other => env_err(other),
    })
}

fn write_reports(report: &EvalReport, formats: &[ReportFormat], dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    formats.iter().map(|f| emit_report(report, *f, dir).map_err(env_err)).collect()
}

/// Runs the whole pipeline and writes `report.*` into the run directory.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport, CliError> {
    let p = prepare(cfg)?;
    let results = run_at(&p, cfg, &cfg.run_dir, cfg.max_iterations)?;
    let report = build_report(&repair_config(cfg, cfg.max_iterations), &results).map_err(env_err)?;
    write_reports(&report, &cfg.formats, &cfg.run_dir)?;
    Ok(report)
}

fn sweep_row(budget: u32, report: &EvalReport, results: &[TaskResult]) -> SweepRow {
    let secs: f64 = results.iter().filter_map(|r| r.trace.as_ref()).map(|t| t.total_elapsed().as_secs_f64()).sum();
    SweepRow {
        max_iterations: budget,
        csr_percent: report.csr_percent,
        pass_at_1_percent: report.pass_at_1_percent,
        total_time_s: secs,
    }
}

/// Results a run with budget `budget` would have produced, derived from a
/// run with a larger budget and a deterministic backend.
pub fn truncate_results(results: &[TaskResult], budget: u32) -> Vec<TaskResult> {
    results
        .iter()
        .map(|r| {
            let Some(trace) = &r.trace else { return r.clone() };
            let t = trace.truncated(budget);
            let compiled = t.compiled();
            TaskResult {
                task_id: r.task_id.clone(),
                compiled,
                solved: compiled && r.solved,
                test_results: if compiled { r.test_results.clone() } else { Vec::new() },
                aborted: if compiled { r.aborted.clone() } else { None },
                trace: Some(t),
            }
        })
        .collect()
}

/// Evaluates each budget and returns one report per budget (in the given
/// order) plus the combined report written to disk, which is the largest
/// budget's report carrying every sweep row.
pub fn cmd_ablate(cfg: &RunConfig, budgets: &[u32]) -> Result<(Vec<EvalReport>, EvalReport), CliError> {
    let Some(&max) = budgets.iter().max() else {
        return Err(CliError::Config("--budgets must list at least one budget".into()));
    };
    let p = prepare(cfg)?;
    let deterministic = p.backend.capabilities().deterministic;
    let mut per_budget: HashMap<u32, (EvalReport, SweepRow)> = HashMap::new();
    if deterministic {
        let full = run_at(&p, cfg, &cfg.run_dir, max)?;
        for &b in budgets {
            let results = truncate_results(&full, b);
            let report = build_report(&repair_config(cfg, b), &results).map_err(env_err)?;
            let row = sweep_row(b, &report, &results);
            per_budget.insert(b, (report, row));
        }
    } else {
        for &b in budgets {
            if per_budget.contains_key(&b) {
                continue;
            }
            let dir = cfg.run_dir.join(format!("budget-{b}"));
            let results = run_at(&p, cfg, &dir, b)?;
            let report = build_report(&repair_config(cfg, b), &results).map_err(env_err)?;
            let row = sweep_row(b, &report, &results);
            per_budget.insert(b, (report, row));
        }
    }
    let reports: Vec<EvalReport> = budgets.iter().map(|b| per_budget[b].0.clone()).collect();
    let mut combined = per_budget[&max].0.clone();
    combined.sweep = budgets.iter().map(|b| per_budget[b].1.clone()).collect();
    write_reports(&combined, &cfg.formats, &cfg.run_dir)?;
    Ok((reports, combined))
}

/// One `line <n>\t<label>\t<group>` entry per error diagnostic.
pub fn cmd_classify(log_path: &Path, source_path: &Path) -> Result<Vec<String>, CliError> {
    let log = fs::read_to_string(log_path).map_err(|e| env_err(format!("{}: {e}", log_path.display())))?;
    let source = fs::read_to_string(source_path).map_err(|e| env_err(format!("{}: {e}", source_path.display())))?;
    let classifier = Classifier::default();
    Ok(parse_diagnostics(&log)
        .diagnostics
        .iter()
        .filter(|d| d.is_error())
        .map(|d| {
            let c = classifier.classify(d, &source);
            format!("line {}\t{}\t{}", d.line, c, c.group())
        })
        .collect())
}

pub fn cmd_inspect(benchmark: &Path) -> Result<Vec<String>, CliError> {
    let tasks = load_benchmark(benchmark).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = vec![format!("{} tasks", tasks.len())];
    for t in &tasks {
        out.push(format!("{}\t{}\t{} tests", t.id, t.entry_point, t.tests.len()));
    }
    Ok(out)
}

pub fn cmd_report(input: &Path, format: &str) -> Result<String, CliError> {
    let format: ReportFormat = format.parse().map_err(CliError::Config)?;
    let text = fs::read_to_string(input).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    let report: EvalReport =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    Ok(render(&report, format))
}
