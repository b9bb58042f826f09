//! Regenerates the recorded sessions and golden files under `fixtures/`.
//!
//! The scenario file describes, per task, the reply the model gives in each
//! round, the compiler log that reply produces and the output of each test
//! once the final reply compiles. A scenario-driven backend and a stub
//! toolchain are run under recording wrappers at budget 5; the resulting
//! sessions then drive a replayed evaluation at budget 3 whose report is the
//! golden report.
//!
//! Run with `cargo run -p cobolassist-cli --example build_fixtures`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cobolassist_cli::{cmd_eval, BackendKind, RunConfig, ToolchainKind};
use cobolassist_core::benchmark::{load_benchmark, render_generation_prompt, Task};
use cobolassist_core::compiler::{format_error_log, parse_diagnostics, ExecOutcome, RecordingToolchain, StubToolchain};
use cobolassist_core::evalkit::{driver_source, run_suite, ReportFormat, TEST_TIMEOUT};
use cobolassist_core::llm::{
    extract_cobol, Backend, Capabilities, GenerationRequest, LlmError, Recorder, RecordingBackend,
};
use cobolassist_core::repairloop::{build_repair_prompt, LoopEnv, RepairConfig, RepairMode};
use cobolassist_core::taxonomy::Classifier;
use serde::Deserialize;

#[derive(Deserialize)]
struct ScenarioFile {
    model: String,
    scenarios: Vec<Scenario>,
}

#[derive(Deserialize)]
struct Scenario {
    task_id: String,
    rounds: Vec<Round>,
    outputs: HashMap<String, String>,
}

#[derive(Deserialize)]
struct Round {
    reply: String,
    log: String,
}

struct ScenarioBackend {
    tasks: Vec<(Task, Scenario)>,
}

impl ScenarioBackend {
    fn sources(s: &Scenario) -> Vec<String> {
        s.rounds.iter().map(|r| extract_cobol(&r.reply).source).collect()
    }
}

impl Backend for ScenarioBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        let prompt = &request.messages.last().expect("non-empty prompt").content;
        for (task, s) in &self.tasks {
            if prompt.contains(&format!("Task Description:\n{}", task.description)) {
                return Ok(s.rounds[0].reply.clone());
            }
        }
        // Repair prompt: find the round whose source is being repaired and
        // answer with the next one (the last reply repeats once exhausted).
        let mut best: Option<(usize, &Scenario, usize)> = None;
        for (_, s) in &self.tasks {
            for (i, src) in Self::sources(s).iter().enumerate() {
                let needle = format!("COBOL Code:\n{}\n\n", src.trim_end_matches('\n'));
                if prompt.contains(&needle) && best.is_none_or(|(len, _, _)| needle.len() > len) {
                    best = Some((needle.len(), s, i));
                }
            }
        }
        let (_, s, i) = best.unwrap_or_else(|| panic!("no scenario matches prompt:\n{prompt}"));
        Ok(s.rounds[(i + 1).min(s.rounds.len() - 1)].reply.clone())
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_chat: true, deterministic: true }
    }
}

fn stub_toolchain(tasks: &[(Task, Scenario)]) -> StubToolchain {
    let mut logs: HashMap<String, String> = HashMap::new();
    let mut runs: HashMap<(String, String), String> = HashMap::new();
    for (task, s) in tasks {
        for r in &s.rounds {
            logs.insert(extract_cobol(&r.reply).source, r.log.clone());
        }
        let module = extract_cobol(&s.rounds.last().expect("rounds").reply).source;
        for case in &task.tests {
            let Some(out) = s.outputs.get(&case.test_id) else { continue };
            let driver = driver_source(task, case).expect("driver");
            runs.insert((driver, module.clone()), format!("{out}\n"));
        }
    }
    StubToolchain::new(
        move |src, mode| match mode {
            cobolassist_core::compiler::CompileMode::Executable => String::new(),
            cobolassist_core::compiler::CompileMode::Module => {
                logs.get(src).cloned().unwrap_or_else(|| panic!("no scenario log for source:\n{src}"))
            }
        },
        move |exe, modules| {
            let module = modules.first().cloned().unwrap_or_default();
            let stdout = runs
                .get(&(exe.to_string(), module))
                .cloned()
                .unwrap_or_else(|| panic!("no scenario output for driver:\n{exe}"));
            ExecOutcome { stdout, stderr: String::new(), exit_code: Some(0), timed_out: false }
        },
    )
}

fn fresh(path: &Path) {
    if path.exists() {
        fs::remove_file(path).expect("remove stale fixture");
    }
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let root = fs::canonicalize(root).expect("fixtures dir");
    let benchmark = root.join("benchmark/tasks.json");
    let tasks = load_benchmark(&benchmark).expect("benchmark");
    let file: ScenarioFile =
        serde_json::from_str(&fs::read_to_string(root.join("scenarios/scenarios.json")).expect("scenarios"))
            .expect("scenario json");
    let mut by_id: HashMap<String, Scenario> = file.scenarios.into_iter().map(|s| (s.task_id.clone(), s)).collect();
    let paired: Vec<(Task, Scenario)> = tasks
        .iter()
        .map(|t| (t.clone(), by_id.remove(&t.id).unwrap_or_else(|| panic!("no scenario for {}", t.id))))
        .collect();

    let replay_dir = root.join("replay");
    fs::create_dir_all(&replay_dir).expect("replay dir");
    let llm_session = replay_dir.join("llm.jsonl");
    let tc_session = replay_dir.join("toolchain.jsonl");
    fresh(&llm_session);
    fresh(&tc_session);

    let toolchain = stub_toolchain(&paired);
    let backend = RecordingBackend::new(ScenarioBackend { tasks: paired }, Recorder::create(&llm_session).expect("recorder"));
    let toolchain = RecordingToolchain::new(Arc::new(toolchain), &tc_session).expect("recording toolchain");
    let scratch = tempfile::tempdir().expect("tempdir");
    let classifier = Classifier::default();
    let env = LoopEnv { toolchain: &toolchain, classifier: &classifier, run_dir: scratch.path() };
    let config = RepairConfig {
        max_iterations: 5,
        mode: RepairMode::CompilerFeedback,
        model_name: file.model.clone(),
        ..RepairConfig::default()
    };
    let results = run_suite(&tasks, &backend, env, &config, 1, None, TEST_TIMEOUT).expect("recording run");
    for r in &results {
        println!("recorded {}: compiled={} solved={}", r.task_id, r.compiled, r.solved);
    }

    let golden = root.join("golden");
    fs::create_dir_all(&golden).expect("golden dir");
    let eval_dir = scratch.path().join("replayed");
    let cfg = RunConfig {
        benchmark_path: benchmark,
        backend_kind: BackendKind::Replay,
        model_name: file.model,
        mode: RepairMode::CompilerFeedback,
        max_iterations: 3,
        run_dir: eval_dir.clone(),
        compiler_path: PathBuf::from("cobc"),
        concurrency: 1,
        formats: vec![ReportFormat::Json],
        session: Some(llm_session),
        record: None,
        endpoint: String::new(),
        toolchain: ToolchainKind::Replay,
        toolchain_session: Some(tc_session),
        record_toolchain: None,
        initial_replies: None,
    };
    let report = cmd_eval(&cfg).expect("replayed eval");
    fs::copy(eval_dir.join("report.json"), golden.join("report.json")).expect("copy report");
    println!("golden report: {} compiled, {} solved", report.n_compiled, report.n_solved);

    let hce = tasks.iter().find(|t| t.id == "has_close_elements").expect("has_close_elements");
    let prompt = render_generation_prompt(hce);
    fs::write(
        golden.join("generation_prompt_has_close_elements.json"),
        serde_json::to_string_pretty(&prompt).expect("json") + "\n",
    )
    .expect("write prompt");

    let fig2_src = fs::read_to_string(root.join("figures/fig2.cob")).expect("fig2.cob");
    let fig2_log = fs::read_to_string(root.join("figures/fig2.log")).expect("fig2.log");
    let formatted = format_error_log(&parse_diagnostics(&fig2_log).diagnostics).expect("fig2 has errors");
    fs::write(golden.join("fig2_error_log.txt"), &formatted).expect("write log");
    let repair = build_repair_prompt(&fig2_src, &formatted).expect("repair prompt");
    fs::write(golden.join("fig2_repair_prompt.txt"), &repair[0].content).expect("write repair prompt");

    let two = fs::read_to_string(root.join("llm/two_fences.md")).expect("two_fences.md");
    fs::write(golden.join("two_fences.cob"), extract_cobol(&two).source).expect("write extraction");
    println!("fixtures written under {}", root.display());
}
