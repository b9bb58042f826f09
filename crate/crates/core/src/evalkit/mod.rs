//! Unit-test execution, metrics and reports.

mod driver;
mod fixed;
mod metrics;
mod report;
mod suite;

use std::path::PathBuf;

use thiserror::Error;

use crate::compiler::CompilerError;
use crate::llm::LlmError;
use crate::repairloop::RepairError;

pub use driver::{driver_source, normalize_output, run_tests, TestFailure, TestResult, DRIVER_PROGRAM_ID, TEST_TIMEOUT};
pub use fixed::Fixed2;
pub use metrics::{avg_iterations, avg_rounds, csr, error_reduction, pass_at_k, Reduction};
pub use report::{
    build_report, emit_report, render, render_csv, render_json, render_markdown, EvalReport, ReportFormat, SweepRow,
    TaskResult, CSV_HEADER,
};
pub use suite::{evaluate_task, run_suite};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no inputs to aggregate")]
    EmptyInput,
    #[error("count {part} exceeds total {whole}")]
    InvalidCounts { part: u64, whole: u64 },
    #[error("pass@{k} needs at least {k} samples per task, found {n_samples}")]
    InsufficientSamples { k: u64, n_samples: u64 },
    #[error("cannot build test driver: {0}")]
    Template(String),
    #[error(transparent)]
    Compiler(#[from] CompilerError),
    #[error(transparent)]
    Repair(RepairError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<RepairError> for EvalError {
    fn from(e: RepairError) -> Self {
        match e {
            RepairError::Compiler(c) => EvalError::Compiler(c),
            other => EvalError::Repair(other),
        }
    }
}

impl EvalError {
    /// Generation failures that mean the run itself cannot proceed.
    pub fn as_llm(&self) -> Option<&LlmError> {
        match self {
            EvalError::Repair(RepairError::Backend(e)) => Some(e),
            _ => None,
        }
    }
}
