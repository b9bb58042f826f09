mod common;

use std::collections::HashMap;
use std::fs;
use std::time::Duration;

use cobolassist_core::benchmark::{load_benchmark, save_task_set, InputBinding, Task, TestCase};
use cobolassist_core::compiler::{
    CompileMode, CompileOutcome, CompileRequest, CompilerError, ExecOutcome, ExecRequest, StubToolchain, Toolchain,
};
use cobolassist_core::evalkit::{
    build_report, driver_source, emit_report, render_csv, render_json, render_markdown, run_suite, run_tests,
    EvalReport, ReportFormat, TestFailure, CSV_HEADER, DRIVER_PROGRAM_ID, TEST_TIMEOUT,
};
use cobolassist_core::llm::ScriptedBackend;
use cobolassist_core::repairloop::{LoopEnv, RepairConfig, RepairMode};
use cobolassist_core::taxonomy::Classifier;
use proptest::prelude::*;

fn exec(stdout: &str) -> ExecOutcome {
    ExecOutcome { stdout: stdout.into(), stderr: String::new(), exit_code: Some(0), timed_out: false }
}

/// Simulates the echo program: prints the value moved into `L-N` as a
/// three-digit number, the way `DISPLAY` shows a `PIC 9(3)` item.
fn echo_run(driver: &str, _modules: &[String]) -> ExecOutcome {
    let value: u32 = driver
        .lines()
        .find_map(|l| l.trim().strip_prefix("MOVE ").and_then(|r| r.strip_suffix(" TO L-N")))
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    exec(&format!("{value:03}\n"))
}

fn compile_module(stub: &dyn Toolchain, dir: &std::path::Path, source: &str) -> std::path::PathBuf {
    let out = stub
        .compile(&CompileRequest { source, mode: CompileMode::Module, workdir: &dir.join("mod"), stem: "ECHO-N" })
        .unwrap();
    assert!(out.succeeded());
    out.artifact_path.unwrap()
}

#[test]
fn driver_copies_linkage_and_calls_entry_point() {
    let tasks = load_benchmark(&common::fixtures().join("benchmark/tasks.json")).unwrap();
    let hce = tasks.iter().find(|t| t.id == "has_close_elements").unwrap();
    let driver = driver_source(hce, &hce.tests[0]).unwrap();
    assert!(driver.contains(&format!("PROGRAM-ID. {DRIVER_PROGRAM_ID}.")));
    assert!(driver.contains("WORKING-STORAGE SECTION.\n01 LINKED-ITEMS.\n05 L-COUNT PIC 9(3)."));
    assert!(driver.contains("    CALL \"HAS-CLOSE-ELEMENTS\" USING LINKED-ITEMS\n    END-CALL\n"));
    assert!(driver.contains("    DISPLAY RESULT\n    STOP RUN.\n"));
    assert!(!driver.contains("LINKAGE SECTION"));
    for b in &hce.tests[0].input_bindings {
        assert!(driver.contains(&format!("    MOVE {} TO {}\n", b.value, b.name)));
    }
}

#[test]
fn alphanumeric_bindings_are_quoted() {
    let b = InputBinding { name: "L-TEXT".into(), value: "say \"hi\"".into(), picture: "X(20)".into() };
    assert_eq!(b.literal(), "\"say \"\"hi\"\"\"");
    let n = InputBinding { name: "L-N".into(), value: "-3".into(), picture: "S9(3)".into() };
    assert_eq!(n.literal(), "-3");
}

#[test]
fn template_without_linkage_is_rejected() {
    let mut t = common::task("x");
    t.template_source = "       IDENTIFICATION DIVISION.\n       PROGRAM-ID. X.\n".into();
    assert!(driver_source(&t, &t.tests[0]).is_err());
}

#[test]
fn correct_module_passes_every_test() {
    let dir = tempfile::tempdir().unwrap();
    let stub = StubToolchain::new(|_, _| String::new(), echo_run);
    let module = compile_module(&stub, dir.path(), &common::good_program("ok"));
    let results = run_tests(&common::task("echo"), &module, &stub, &dir.path().join("tests"), TEST_TIMEOUT).unwrap();
    assert_eq!(results.len(), 2);
    assert!(results.iter().all(|r| r.passed && r.failure.is_none()));
    assert_eq!(results[1].actual_output, "042");
    assert!(dir.path().join("tests/t1/driver.cob").exists());
}

#[test]
fn constant_solution_fails_other_cases() {
    let dir = tempfile::tempdir().unwrap();
    let stub = StubToolchain::new(|_, _| String::new(), |_, _| exec("007   \n\n"));
    let module = compile_module(&stub, dir.path(), &common::good_program("const"));
    let results = run_tests(&common::task("echo"), &module, &stub, &dir.path().join("tests"), TEST_TIMEOUT).unwrap();
    // Trailing blanks and empty lines are ignored.
    assert!(results[0].passed);
    assert_eq!(results[1].failure, Some(TestFailure::WrongOutput));
}

#[test]
fn timeouts_and_crashes_are_classified() {
    let dir = tempfile::tempdir().unwrap();
    let stub = StubToolchain::new(
        |_, _| String::new(),
        |driver, _| {
            if driver.contains("MOVE 7 TO") {
                ExecOutcome { stdout: String::new(), stderr: String::new(), exit_code: None, timed_out: true }
            } else {
                ExecOutcome { stdout: String::new(), stderr: "libcob: error".into(), exit_code: Some(1), timed_out: false }
            }
        },
    );
    let module = compile_module(&stub, dir.path(), &common::good_program("slow"));
    let results =
        run_tests(&common::task("echo"), &module, &stub, &dir.path().join("tests"), Duration::from_millis(50)).unwrap();
    assert_eq!(results[0].failure, Some(TestFailure::Timeout));
    assert_eq!(results[1].failure, Some(TestFailure::RuntimeError));
}

#[test]
fn driver_compile_failure_is_not_a_solution_error() {
    let dir = tempfile::tempdir().unwrap();
    let stub = StubToolchain::new(
        |_, mode| match mode {
            CompileMode::Executable => "prog.cob:3: error: invalid level number '55'\n".into(),
            CompileMode::Module => String::new(),
        },
        echo_run,
    );
    let module = compile_module(&stub, dir.path(), &common::good_program("m"));
    let results = run_tests(&common::task("echo"), &module, &stub, &dir.path().join("tests"), TEST_TIMEOUT).unwrap();
    assert!(results.iter().all(|r| r.failure == Some(TestFailure::DriverCompileError)));
}

/// Toolchain whose every compile fails at the environment level.
struct Broken;

impl Toolchain for Broken {
    fn compile(&self, _: &CompileRequest<'_>) -> Result<CompileOutcome, CompilerError> {
        Err(CompilerError::CompilerNotFound("cobc".into()))
    }
    fn execute(&self, _: &ExecRequest<'_>) -> Result<ExecOutcome, CompilerError> {
        unreachable!()
    }
    fn describe(&self) -> String {
        "broken".into()
    }
}

fn suite_tasks() -> Vec<Task> {
    vec![common::task("a_fixed_late"), common::task("b_ok"), common::task("c_never")]
}

/// Replies in task order (concurrency 1): `a` compiles after one repair,
/// `b` at once, `c` never within budget 2.
fn suite_script() -> Vec<String> {
    [
        common::broken_program("a0"),
        common::good_program("a1"),
        common::good_program("b0"),
        common::broken_program("c0"),
        common::broken_program("c1"),
        common::broken_program("c2"),
    ]
    .iter()
    .map(|s| common::fenced(s))
    .collect()
}

fn suite_report(dir: &std::path::Path) -> EvalReport {
    let stub = StubToolchain::new(
        |src, _| match src.lines().position(|l| l.contains("BROKEN")) {
            Some(i) => format!("prog.cob:{}: error: 'BROKEN' is not defined\n", i + 1),
            None => String::new(),
        },
        echo_run,
    );
    let classifier = Classifier::default();
    let env = LoopEnv { toolchain: &stub, classifier: &classifier, run_dir: dir };
    let config = RepairConfig { max_iterations: 2, mode: RepairMode::CompilerFeedback, ..RepairConfig::default() };
    let backend = ScriptedBackend::new(suite_script());
    let results = run_suite(&suite_tasks(), &backend, env, &config, 1, None, TEST_TIMEOUT).unwrap();
    assert_eq!(results.iter().map(|r| r.task_id.as_str()).collect::<Vec<_>>(), ["a_fixed_late", "b_ok", "c_never"]);
    build_report(&config, &results).unwrap()
}

#[test]
fn suite_report_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let r = suite_report(dir.path());
    assert_eq!((r.n_tasks, r.n_compiled, r.n_solved, r.n_aborted), (3, 2, 2, 0));
    assert_eq!(r.csr_percent.to_string(), "66.67");
    assert_eq!(r.pass_at_1_percent.to_string(), "66.67");
    // Initial errors: a 1, c 1. Final: c 1.
    assert_eq!((r.errors_before, r.errors_after), (2, 1));
    assert_eq!(r.error_reduction_percent.to_string(), "50.00");
    // Rounds: a 1, b 0, c 2.
    assert_eq!(r.avg_iterations.to_string(), "1.00");
    assert_eq!(r.distribution_before.count(cobolassist_core::taxonomy::ErrorCategory::UndefinedObject), 2);
    assert!(dir.path().join("a_fixed_late/trace.json").exists());
    assert!(dir.path().join("b_ok/tests.json").exists());
    assert!(dir.path().join("c_never/c_never.iter2.cob").exists());
}

#[test]
fn aborted_tasks_count_as_not_compiled() {
    let dir = tempfile::tempdir().unwrap();
    let classifier = Classifier::default();
    let env = LoopEnv { toolchain: &Broken, classifier: &classifier, run_dir: dir.path() };
    let config = RepairConfig::default();
    let backend = ScriptedBackend::new(suite_script());
    let results = run_suite(&suite_tasks()[..2], &backend, env, &config, 1, None, TEST_TIMEOUT).unwrap();
    assert!(results.iter().all(|r| r.aborted.is_some() && !r.compiled));
    let r = build_report(&config, &results).unwrap();
    assert_eq!((r.n_tasks, r.n_compiled, r.n_aborted), (2, 0, 2));
    assert_eq!(r.csr_percent.to_string(), "0.00");
}

#[test]
fn initial_replies_replace_generation() {
    let dir = tempfile::tempdir().unwrap();
    let stub = StubToolchain::failing_on("BROKEN");
    let classifier = Classifier::default();
    let env = LoopEnv { toolchain: &stub, classifier: &classifier, run_dir: dir.path() };
    let config = RepairConfig { max_iterations: 1, ..RepairConfig::default() };
    let initial: HashMap<String, String> =
        [("b_ok".to_string(), common::fenced(&common::good_program("ext")))].into_iter().collect();
    let backend = ScriptedBackend::new(Vec::<String>::new());
    let results =
        run_suite(&suite_tasks()[1..2], &backend, env, &config, 1, Some(&initial), TEST_TIMEOUT).unwrap();
    assert!(results[0].compiled);
}

#[test]
fn renderers_agree_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let r = suite_report(&dir.path().join("run"));
    let json = render_json(&r);
    assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), r);
    for banned in ["elapsed", "runtime_ms", "total_time_s"] {
        assert!(!json.contains(banned), "{banned} leaked into report.json");
    }
    let md = render_markdown(&r);
    assert!(md.contains("| gpt-4o | 3 | 2 | 2 | 66.67 | 66.67 |"));
    assert!(md.contains("| gpt-4o | 2 → 1 | 50.00 | 1.00 |"));
    let csv = render_csv(&r);
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    assert_eq!(reader.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER.to_vec());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 18);
    let uo = rows.iter().find(|row| &row[0] == "distribution_before" && &row[1] == "UndefinedObject").unwrap();
    assert_eq!((&uo[2], &uo[3]), ("2", "100.00"));
    for f in ReportFormat::ALL {
        let path = emit_report(&r, f, dir.path()).unwrap();
        assert_eq!(path, dir.path().join(format!("report.{}", f.extension())));
        assert_eq!(fs::read_to_string(path).unwrap(), cobolassist_core::evalkit::render(&r, f));
    }
    assert!("yaml".parse::<ReportFormat>().is_err());
    assert_eq!("md".parse::<ReportFormat>().ok(), Some(ReportFormat::Markdown));
}

#[test]
fn report_is_independent_of_result_order() {
    let dir = tempfile::tempdir().unwrap();
    let stub = StubToolchain::failing_on("BROKEN");
    let classifier = Classifier::default();
    let env = LoopEnv { toolchain: &stub, classifier: &classifier, run_dir: dir.path() };
    let config = RepairConfig { max_iterations: 2, ..RepairConfig::default() };
    let backend = ScriptedBackend::new(suite_script());
    let mut results = run_suite(&suite_tasks(), &backend, env, &config, 1, None, TEST_TIMEOUT).unwrap();
    let a = build_report(&config, &results).unwrap();
    results.reverse();
    assert_eq!(build_report(&config, &results).unwrap(), a);
}

#[test]
fn benchmark_loader_rejects_missing_and_malformed() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_benchmark(&dir.path().join("nope.json")).is_err());
    assert!(load_benchmark(dir.path()).is_err());
    let mut t = common::task("x");
    t.tests.clear();
    save_task_set(&dir.path().join("bad.json"), "bad", &[t]).unwrap();
    assert!(load_benchmark(&dir.path().join("bad.json")).is_err());
    save_task_set(&dir.path().join("dup.json"), "dup", &[common::task("x"), common::task("x")]).unwrap();
    assert!(load_benchmark(&dir.path().join("dup.json")).is_err());
}

fn arb_task() -> impl Strategy<Value = Task> {
    (
        "[a-z][a-z0-9_]{0,12}",
        "\\PC{0,80}",
        prop::collection::vec(("[A-Z]-[A-Z]{1,6}", "-?[0-9]{1,4}|[a-z ]{0,10}", "X\\([0-9]\\)|S?9\\([0-9]\\)"), 0..4),
        "[0-9+-]{1,8}",
        1usize..4,
    )
        .prop_map(|(id, description, bindings, expected, n_tests)| Task {
            id,
            description,
            template_source: common::TEMPLATE.into(),
            entry_point: "ECHO-N".into(),
            result_name: "RESULT".into(),
            tests: (0..n_tests)
                .map(|i| TestCase {
                    test_id: format!("t{i}"),
                    input_bindings: bindings
                        .iter()
                        .map(|(n, v, p)| InputBinding { name: n.clone(), value: v.clone(), picture: p.clone() })
                        .collect(),
                    expected_output: expected.clone(),
                })
                .collect(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn task_sets_round_trip(tasks in prop::collection::vec(arb_task(), 1..6)) {
        let mut unique: Vec<Task> = Vec::new();
        for t in tasks {
            if !unique.iter().any(|u| u.id == t.id) {
                unique.push(t);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.json");
        save_task_set(&path, "prop", &unique).unwrap();
        let loaded = load_benchmark(&path).unwrap();
        unique.sort_by(|a, b| a.id.cmp(&b.id));
        prop_assert_eq!(loaded, unique);
    }
}
