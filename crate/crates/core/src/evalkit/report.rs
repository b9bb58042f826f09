use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::driver::TestResult;
use super::metrics::{avg_rounds, csr, error_reduction, pass_at_k};
use super::{EvalError, Fixed2};
use crate::repairloop::{RepairConfig, RepairMode, RepairTrace};
use crate::taxonomy::{distribution, Distribution, ErrorCategory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub task_id: String,
    pub compiled: bool,
    pub solved: bool,
    pub trace: Option<RepairTrace>,
    pub test_results: Vec<TestResult>,
    /// Environment failure that stopped the task before it finished.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl TaskResult {
    pub fn aborted(task_id: &str, reason: String) -> Self {
        TaskResult {
            task_id: task_id.to_string(),
            compiled: false,
            solved: false,
            trace: None,
            test_results: Vec::new(),
            aborted: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub max_iterations: u32,
    pub csr_percent: Fixed2,
    pub pass_at_1_percent: Fixed2,
    pub total_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub mode: RepairMode,
    pub max_iterations: u32,
    pub n_tasks: u64,
    pub n_compiled: u64,
    pub n_solved: u64,
    pub n_aborted: u64,
    pub csr_percent: Fixed2,
    pub pass_at_1_percent: Fixed2,
    pub errors_before: u64,
    pub errors_after: u64,
    pub error_reduction_percent: Fixed2,
    pub error_reduction_empty_baseline: bool,
    pub avg_iterations: Fixed2,
    pub distribution_before: Distribution,
    pub distribution_after: Distribution,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRow>,
}

/// Folds task results into a report. Input order does not matter.
pub fn build_report(config: &RepairConfig, results: &[TaskResult]) -> Result<EvalReport, EvalError> {
    let mut sorted: Vec<&TaskResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let n_tasks = sorted.len() as u64;
    let n_compiled = sorted.iter().filter(|r| r.compiled).count() as u64;
    let n_solved = sorted.iter().filter(|r| r.solved).count() as u64;
    let n_aborted = sorted.iter().filter(|r| r.aborted.is_some()).count() as u64;
    let traces: Vec<&RepairTrace> = sorted.iter().filter_map(|r| r.trace.as_ref()).collect();

    let errors_before: u64 = traces.iter().map(|t| t.errors_before() as u64).sum();
    let errors_after: u64 = traces.iter().map(|t| t.errors_after() as u64).sum();
    let reduction = error_reduction(errors_before, errors_after);
    let rounds: Vec<usize> = traces.iter().map(|t| t.repair_rounds()).collect();
    let avg_iterations = if rounds.is_empty() { Fixed2::ZERO } else { avg_rounds(&rounds)? };

    let before: Vec<ErrorCategory> = traces.iter().flat_map(|t| t.initial().categories.iter().copied()).collect();
    let after: Vec<ErrorCategory> = traces.iter().flat_map(|t| t.last().categories.iter().copied()).collect();

    let single: Vec<(u64, u64)> = sorted.iter().map(|r| (1, r.solved as u64)).collect();
    Ok(EvalReport {
        model: config.model_name.clone(),
        mode: config.mode,
        max_iterations: config.round_budget(),
        n_tasks,
        n_compiled,
        n_solved,
        n_aborted,
        csr_percent: csr(n_compiled, n_tasks)?,
        pass_at_1_percent: pass_at_k(&single, 1)?,
        errors_before,
        errors_after,
        error_reduction_percent: reduction.percent,
        error_reduction_empty_baseline: reduction.empty_baseline,
        avg_iterations,
        distribution_before: distribution(&before),
        distribution_after: distribution(&after),
        sweep: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Markdown,
    Csv,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Markdown, ReportFormat::Csv];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

pub const CSV_HEADER: [&str; 7] = ["section", "key", "count", "percent", "csr", "pass_at_1", "total_time_s"];

pub fn render_json(report: &EvalReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

fn share(d: &Distribution, c: ErrorCategory) -> String {
    d.fraction(c).map_or_else(String::new, |f| format!("{:.2}", f * 100.0))
}

pub fn render_markdown(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Evaluation report\n");
    let _ = writeln!(s, "Mode `{}`, at most {} repair iterations, {} tasks.\n", r.mode.as_str(), r.max_iterations, r.n_tasks);
    let _ = writeln!(s, "| Model | Tasks | Compiled | Solved | CSR (%) | pass@1 (%) |");
    let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|");
    let _ = writeln!(
        s,
        "| {} | {} | {} | {} | {} | {} |\n",
        r.model, r.n_tasks, r.n_compiled, r.n_solved, r.csr_percent, r.pass_at_1_percent
    );
    let _ = writeln!(s, "| Model | Compilation errors (before → after) | Error reduction (%) | Avg. iterations |");
    let _ = writeln!(s, "|---|---:|---:|---:|");
    let _ = writeln!(
        s,
        "| {} | {} → {} | {} | {} |",
        r.model, r.errors_before, r.errors_after, r.error_reduction_percent, r.avg_iterations
    );
    if !(r.distribution_before.empty && r.distribution_after.empty) {
        let _ = writeln!(s, "\n| Category | Before | Before (%) | After | After (%) |");
        let _ = writeln!(s, "|---|---:|---:|---:|---:|");
        for c in ErrorCategory::ALL {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                c,
                r.distribution_before.count(c),
                share(&r.distribution_before, c),
                r.distribution_after.count(c),
                share(&r.distribution_after, c)
            );
        }
    }
    if !r.sweep.is_empty() {
        let _ = writeln!(s, "\n| Max iterations | CSR (%) | pass@1 (%) | Time (s) |");
        let _ = writeln!(s, "|---:|---:|---:|---:|");
        for row in &r.sweep {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.3} |",
                row.max_iterations, row.csr_percent, row.pass_at_1_percent, row.total_time_s
            );
        }
    }
    s
}

pub fn render_csv(r: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for (section, d) in [("distribution_before", &r.distribution_before), ("distribution_after", &r.distribution_after)] {
        if d.empty {
            continue;
        }
        for c in ErrorCategory::ALL {
            let count = d.count(c).to_string();
            w.write_record([section, c.as_str(), &count, &share(d, c), "", "", ""]).expect("in-memory write");
        }
    }
    for row in &r.sweep {
        w.write_record([
            "sweep",
            &row.max_iterations.to_string(),
            "",
            "",
            &row.csr_percent.to_string(),
            &row.pass_at_1_percent.to_string(),
            &format!("{:.3}", row.total_time_s),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn render(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
    }
}

/// Writes `<dir>/report.<ext>`.
pub fn emit_report(report: &EvalReport, format: ReportFormat, dir: &Path) -> Result<PathBuf, EvalError> {
    fs::create_dir_all(dir).map_err(|source| EvalError::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(format!("report.{}", format.extension()));
    fs::write(&path, render(report, format)).map_err(|source| EvalError::Io { path: path.clone(), source })?;
    Ok(path)
}
