mod common;

use std::fs;

use cobolassist_core::benchmark::{load_benchmark, render_generation_prompt};
use cobolassist_core::compiler::{compile_key, CompileMode, CompileRequest, CompilerError, ReplayToolchain, Toolchain};
use cobolassist_core::llm::{
    read_session, Backend, ChatMessage, GenerationRequest, LlmError, Recorder, RecordingBackend, ReplayBackend,
    ScriptedBackend,
};
use cobolassist_core::repairloop::{build_refine_prompt, build_repair_prompt, RepairError};

#[test]
fn committed_llm_session_is_consistent() {
    let path = common::fixtures().join("replay/llm.jsonl");
    let records = read_session(&path).unwrap();
    assert!(!records.is_empty());
    let backend = ReplayBackend::open(&path).unwrap();
    for r in &records {
        assert_eq!(r.request.hash(), r.request_hash);
        assert_eq!(backend.generate(&r.request).unwrap(), r.response);
    }
    assert!(backend.capabilities().deterministic);
}

#[test]
fn replay_miss_on_unseen_request() {
    let backend = ReplayBackend::open(&common::fixtures().join("replay/llm.jsonl")).unwrap();
    let req = GenerationRequest::new("gpt-4o", vec![ChatMessage::user("never recorded")]);
    assert!(matches!(backend.generate(&req), Err(LlmError::ReplayMiss(_))));
}

#[test]
fn request_hash_ignores_output_cap_but_not_temperature() {
    let a = GenerationRequest::new("m", vec![ChatMessage::user("x")]);
    let b = GenerationRequest { max_output_tokens: 17, ..a.clone() };
    let c = GenerationRequest { temperature: 0.5, ..a.clone() };
    let d = GenerationRequest { model_name: "n".into(), ..a.clone() };
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
    assert_ne!(a.hash(), d.hash());
}

#[test]
fn recorded_session_replays() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.jsonl");
    let rec = RecordingBackend::new(ScriptedBackend::new(["one", "two"]), Recorder::create(&path).unwrap());
    let q1 = GenerationRequest::new("m", vec![ChatMessage::user("q1")]);
    let q2 = GenerationRequest::new("m", vec![ChatMessage::user("q2")]);
    assert_eq!(rec.generate(&q1).unwrap(), "one");
    assert_eq!(rec.generate(&q2).unwrap(), "two");
    let replay = ReplayBackend::open(&path).unwrap();
    assert_eq!(replay.len(), 2);
    assert_eq!(replay.generate(&q2).unwrap(), "two");
    assert_eq!(replay.generate(&q1).unwrap(), "one");
}

#[test]
fn toolchain_session_serves_recorded_compiles_only() {
    let tc = ReplayToolchain::open(&common::fixtures().join("replay/toolchain.jsonl")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let req = CompileRequest { source: "unseen", mode: CompileMode::Module, workdir: dir.path(), stem: "X" };
    assert!(matches!(tc.compile(&req), Err(CompilerError::ReplayMiss(_))));
    assert_ne!(compile_key("a", CompileMode::Module), compile_key("a", CompileMode::Executable));
}

#[test]
fn generation_prompt_golden() {
    let tasks = load_benchmark(&common::fixtures().join("benchmark/tasks.json")).unwrap();
    let hce = tasks.iter().find(|t| t.id == "has_close_elements").unwrap();
    let golden = fs::read_to_string(common::fixtures().join("golden/generation_prompt_has_close_elements.json")).unwrap();
    let want: Vec<ChatMessage> = serde_json::from_str(&golden).unwrap();
    assert_eq!(render_generation_prompt(hce), want);
    let user = &want[1].content;
    assert!(user.contains(&format!("Task Description:\n{}", hce.description)));
    assert!(user.contains(&format!("COBOL Template:\n{}", hce.template_source)));
}

#[test]
fn fig2_repair_prompt_golden() {
    let src = fs::read_to_string(common::fixtures().join("figures/fig2.cob")).unwrap();
    let log = fs::read_to_string(common::fixtures().join("golden/fig2_error_log.txt")).unwrap();
    let golden = fs::read_to_string(common::fixtures().join("golden/fig2_repair_prompt.txt")).unwrap();
    let got = build_repair_prompt(&src, &log).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].content, golden);
    // Layout: persona and instructions, then code, then the log, last.
    let code_at = golden.find("\n\nInput:\n\nCOBOL Code:\n").unwrap();
    let log_at = golden.find("\n\nCompiler Error Log:\nline 41: error: syntax error, unexpected PROCEDURE\n").unwrap();
    assert!(golden.starts_with("You are an experienced COBOL software engineer"));
    assert!(golden.contains("compiler\u{2019}s error log"));
    assert!(code_at < log_at);
    assert!(golden.ends_with("unexpected PROCEDURE\n"));
}

#[test]
fn repair_prompt_requires_a_log() {
    assert!(matches!(build_repair_prompt("X", "  \n"), Err(RepairError::EmptyErrorLog)));
    let refine = build_refine_prompt("       IDENTIFICATION DIVISION.\n");
    assert!(refine[0].content.ends_with("COBOL Code:\n       IDENTIFICATION DIVISION.\n"));
}
