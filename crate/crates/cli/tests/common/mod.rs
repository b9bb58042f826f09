#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cobolassist_cli::{BackendKind, RunConfig, ToolchainKind};
use cobolassist_core::evalkit::ReportFormat;
use cobolassist_core::llm::DEFAULT_ENDPOINT;
use cobolassist_core::repairloop::RepairMode;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Settings that replay the committed LLM and compiler sessions.
pub fn replay_config(run_dir: &Path, max_iterations: u32) -> RunConfig {
    let f = fixtures();
    RunConfig {
        benchmark_path: f.join("benchmark/tasks.json"),
        backend_kind: BackendKind::Replay,
        model_name: "gpt-4o".into(),
        mode: RepairMode::CompilerFeedback,
        max_iterations,
        run_dir: run_dir.to_path_buf(),
        compiler_path: PathBuf::from("cobc"),
        concurrency: 2,
        formats: vec![ReportFormat::Json],
        session: Some(f.join("replay/llm.jsonl")),
        record: None,
        endpoint: DEFAULT_ENDPOINT.to_string(),
        toolchain: ToolchainKind::Replay,
        toolchain_session: Some(f.join("replay/toolchain.jsonl")),
        record_toolchain: None,
        initial_replies: None,
    }
}
