//! The compile-and-repair loop.
//!
//! Round 0 asks the model for a solution from the task prompt. Each later
//! round sends a fresh single-turn prompt holding the latest source and,
//! in compiler-feedback mode, its formatted error log. The loop stops at
//! the first successful compile or when the round budget runs out.

mod prompts;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

use crate::benchmark::{render_generation_prompt, Task};
use crate::compiler::{format_error_log, CompileMode, CompileOutcome, CompileRequest, CompilerError, Toolchain};
use crate::llm::{self, extract_cobol, Backend, ChatMessage, GenerationRequest, LlmError, DEFAULT_MAX_OUTPUT_TOKENS};
use crate::taxonomy::{Classifier, ErrorCategory};

pub use prompts::{build_refine_prompt, build_repair_prompt};

pub const DEFAULT_MAX_ITERATIONS: u32 = 3;

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("error log is empty")]
    EmptyErrorLog,
    #[error("generation failed: {0}")]
    Backend(#[from] LlmError),
    #[error("compiler environment failure: {0}")]
    Compiler(#[from] CompilerError),
    #[error("invalid repair configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RepairError + '_ {
    move |source| RepairError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RepairMode {
    /// Initial generation only.
    None,
    /// Improve-only prompts without diagnostics.
    ZeroShot,
    #[default]
    CompilerFeedback,
}

impl RepairMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RepairMode::None => "none",
            RepairMode::ZeroShot => "zero_shot",
            RepairMode::CompilerFeedback => "compiler_feedback",
        }
    }
}

impl std::str::FromStr for RepairMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(RepairMode::None),
            "zero_shot" | "zero-shot" => Ok(RepairMode::ZeroShot),
            "compiler_feedback" | "compiler-feedback" => Ok(RepairMode::CompilerFeedback),
            other => Err(format!("unknown repair mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub max_iterations: u32,
    pub mode: RepairMode,
    pub temperature: f64,
    pub model_name: String,
    pub max_output_tokens: u32,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            mode: RepairMode::CompilerFeedback,
            temperature: 0.0,
            model_name: String::from("gpt-4o"),
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<(), RepairError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(RepairError::Config(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.max_output_tokens == 0 {
            return Err(RepairError::Config("max_output_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Repair rounds allowed after the initial generation.
    pub fn round_budget(&self) -> u32 {
        match self.mode {
            RepairMode::None => 0,
            _ => self.max_iterations,
        }
    }

    fn request(&self, messages: Vec<ChatMessage>) -> GenerationRequest {
        GenerationRequest {
            model_name: self.model_name.clone(),
            messages,
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionFlag {
    /// The reply had no usable code block or division header.
    UnfencedFallback,
    /// The reply reproduced the previous source; it was not recompiled.
    Stagnant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: u32,
    pub source: String,
    pub outcome: CompileOutcome,
    pub categories: Vec<ErrorCategory>,
    pub prompt_messages: Vec<ChatMessage>,
    pub extraction_flags: BTreeSet<ExtractionFlag>,
    /// Wall time of generate plus compile. Kept out of persisted traces.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalStatus {
    Compiled,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairTrace {
    pub task_id: String,
    pub config: RepairConfig,
    pub records: Vec<IterationRecord>,
    pub final_status: FinalStatus,
}

impl RepairTrace {
    fn status_of(records: &[IterationRecord]) -> FinalStatus {
        match records.last() {
            Some(r) if r.outcome.succeeded() => FinalStatus::Compiled,
            _ => FinalStatus::Exhausted,
        }
    }

    pub fn compiled(&self) -> bool {
        self.final_status == FinalStatus::Compiled
    }

    pub fn repair_rounds(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn initial(&self) -> &IterationRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("trace has an initial record")
    }

    pub fn errors_before(&self) -> usize {
        self.initial().outcome.error_count()
    }

    pub fn errors_after(&self) -> usize {
        self.last().outcome.error_count()
    }

    pub fn total_elapsed(&self) -> Duration {
        self.records.iter().map(|r| r.elapsed).sum()
    }

    /// The trace a run with a smaller budget would have produced. Exact
    /// when the backend is deterministic, since each round depends only on
    /// the record before it.
    pub fn truncated(&self, max_iterations: u32) -> RepairTrace {
        let keep = (max_iterations as usize + 1).min(self.records.len());
        let records = self.records[..keep].to_vec();
        let mut config = self.config.clone();
        config.max_iterations = max_iterations;
        RepairTrace {
            task_id: self.task_id.clone(),
            final_status: Self::status_of(&records),
            config,
            records,
        }
    }

    /// Writes `trace.json` and per-round `.cob` and `.log` files under
    /// `<run>/<task_id>/`.
    pub fn persist(&self, run_dir: &Path) -> Result<PathBuf, RepairError> {
        let dir = run_dir.join(&self.task_id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for r in &self.records {
            let cob = dir.join(format!("{}.iter{}.cob", self.task_id, r.index));
            let log = dir.join(format!("{}.iter{}.log", self.task_id, r.index));
            fs::write(&cob, &r.source).map_err(io_err(&cob))?;
            fs::write(&log, &r.outcome.raw_log).map_err(io_err(&log))?;
        }
        let path = dir.join("trace.json");
        let text = serde_json::to_string_pretty(self).expect("trace serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<RepairTrace, RepairError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| RepairError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })
    }
}

/// Compiler, classifier and run directory shared by all tasks of a run.
#[derive(Clone, Copy)]
pub struct LoopEnv<'a> {
    pub toolchain: &'a dyn Toolchain,
    pub classifier: &'a Classifier,
    pub run_dir: &'a Path,
}

impl LoopEnv<'_> {
    fn compile(&self, task: &Task, index: u32, source: &str) -> Result<(CompileOutcome, Vec<ErrorCategory>), RepairError> {
        let workdir = self.run_dir.join(&task.id).join(format!("iter{index}"));
        let req = CompileRequest { source, mode: CompileMode::Module, workdir: &workdir, stem: &task.entry_point };
        let mut outcome = self.toolchain.compile(&req)?;
        if let Some(p) = outcome.artifact_path.take() {
            outcome.artifact_path = Some(p.strip_prefix(self.run_dir).map(Path::to_path_buf).unwrap_or(p));
        }
        let categories = outcome.errors().map(|d| self.classifier.classify(d, source)).collect();
        Ok((outcome, categories))
    }
}

/// Where round 0's source comes from.
#[derive(Debug, Clone)]
pub enum Initial {
    Generate,
    /// A reply produced elsewhere, still passed through extraction.
    Given(String),
}

/// Runs the loop for one task in the mode named by `config`.
pub fn run_task(
    task: &Task,
    backend: &dyn Backend,
    env: LoopEnv<'_>,
    config: &RepairConfig,
    initial: Initial,
) -> Result<RepairTrace, RepairError> {
    config.validate()?;
    let mut records: Vec<IterationRecord> = Vec::new();

    let start = Instant::now();
    let (messages, reply) = match initial {
        Initial::Generate => {
            let messages = render_generation_prompt(task);
            let reply = llm::generate(backend, &config.request(messages.clone()))?;
            (messages, reply)
        }
        Initial::Given(reply) => (Vec::new(), reply),
    };
    let extraction = extract_cobol(&reply);
    let mut flags = BTreeSet::new();
    if extraction.unfenced_fallback {
        flags.insert(ExtractionFlag::UnfencedFallback);
    }
    let (outcome, categories) = env.compile(task, 0, &extraction.source)?;
    records.push(IterationRecord {
        index: 0,
        source: extraction.source,
        outcome,
        categories,
        prompt_messages: messages,
        extraction_flags: flags,
        elapsed: start.elapsed(),
    });

    let budget = config.round_budget();
    while !records.last().expect("non-empty").outcome.succeeded() && (records.len() as u32) <= budget {
        let start = Instant::now();
        let index = records.len() as u32;
        let prev = records.last().expect("non-empty");
        let messages = match config.mode {
            RepairMode::CompilerFeedback => {
                let log = format_error_log(&prev.outcome.diagnostics).map_err(|_| RepairError::EmptyErrorLog)?;
                build_repair_prompt(&prev.source, &log)?
            }
            RepairMode::ZeroShot => build_refine_prompt(&prev.source),
            RepairMode::None => unreachable!("no rounds in generation-only mode"),
        };
        let reply = llm::generate(backend, &config.request(messages.clone()))?;
        let extraction = extract_cobol(&reply);
        let mut flags = BTreeSet::new();
        if extraction.unfenced_fallback {
            flags.insert(ExtractionFlag::UnfencedFallback);
        }
        let (outcome, categories) = if extraction.source == prev.source {
            debug!(task = %task.id, index, "reply repeats previous source");
            flags.insert(ExtractionFlag::Stagnant);
            (prev.outcome.clone(), prev.categories.clone())
        } else {
            env.compile(task, index, &extraction.source)?
        };
        records.push(IterationRecord {
            index,
            source: extraction.source,
            outcome,
            categories,
            prompt_messages: messages,
            extraction_flags: flags,
            elapsed: start.elapsed(),
        });
    }

    let final_status = RepairTrace::status_of(&records);
    info!(task = %task.id, rounds = records.len() - 1, ?final_status, "task finished");
    Ok(RepairTrace { task_id: task.id.clone(), config: config.clone(), records, final_status })
}

fn require_mode(config: &RepairConfig, mode: RepairMode) -> Result<(), RepairError> {
    if config.mode != mode {
        return Err(RepairError::Config(format!("expected mode {}, got {}", mode.as_str(), config.mode.as_str())));
    }
    Ok(())
}

/// Compiler-feedback repair.
pub fn run_repair(task: &Task, backend: &dyn Backend, env: LoopEnv<'_>, config: &RepairConfig) -> Result<RepairTrace, RepairError> {
    require_mode(config, RepairMode::CompilerFeedback)?;
    run_task(task, backend, env, config, Initial::Generate)
}

/// Refinement without diagnostics. Compilation still decides termination.
pub fn run_zero_shot_refinement(
    task: &Task,
    backend: &dyn Backend,
    env: LoopEnv<'_>,
    config: &RepairConfig,
) -> Result<RepairTrace, RepairError> {
    require_mode(config, RepairMode::ZeroShot)?;
    run_task(task, backend, env, config, Initial::Generate)
}
