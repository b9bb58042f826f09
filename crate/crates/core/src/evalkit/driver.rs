use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tracing::debug;

use super::EvalError;
use crate::benchmark::{Task, TestCase};
use crate::compiler::{CompileMode, CompileRequest, ExecRequest, Toolchain};
use crate::source;

/// Budget for one test program run.
pub const TEST_TIMEOUT: Duration = Duration::from_secs(10);

pub const DRIVER_PROGRAM_ID: &str = "COBOLASSIST-DRIVER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFailure {
    /// The generated driver did not compile. Not a solution compile error.
    DriverCompileError,
    Timeout,
    /// Non-zero exit, typically a failed dynamic CALL or a runtime check.
    RuntimeError,
    WrongOutput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_id: String,
    pub passed: bool,
    pub actual_output: String,
    pub expected_output: String,
    #[serde(skip)]
    pub runtime_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<TestFailure>,
}

/// Trailing blanks on each line and trailing empty lines are ignored.
pub fn normalize_output(text: &str) -> String {
    let lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    let keep = lines.iter().rposition(|l| !l.is_empty()).map_or(0, |i| i + 1);
    lines[..keep].join("\n")
}

/// Free-format driver that copies the template's LINKAGE items into
/// WORKING-STORAGE, moves the test inputs in, CALLs the entry point and
/// displays the result item.
pub fn driver_source(task: &Task, case: &TestCase) -> Result<String, EvalError> {
    let linkage = source::linkage_section_body(&task.template_source)
        .ok_or_else(|| EvalError::Template(format!("task {} has no LINKAGE SECTION", task.id)))?;
    let mut using = source::procedure_using(&task.template_source);
    if using.is_empty() {
        using = linkage
            .iter()
            .filter_map(|l| {
                let w = source::words(&l.to_ascii_uppercase());
                (w.first().map(String::as_str) == Some("01")).then(|| w.get(1).cloned()).flatten()
            })
            .map(|n| n.trim_end_matches('.').to_string())
            .collect();
    }
    let mut out = String::new();
    out.push_str("IDENTIFICATION DIVISION.\n");
    out.push_str(&format!("PROGRAM-ID. {DRIVER_PROGRAM_ID}.\n"));
    out.push_str("DATA DIVISION.\nWORKING-STORAGE SECTION.\n");
    for line in &linkage {
        out.push_str(line.trim());
        out.push('\n');
    }
    out.push_str("PROCEDURE DIVISION.\n");
    for b in &case.input_bindings {
        out.push_str(&format!("    MOVE {} TO {}\n", b.literal(), b.name));
    }
    out.push_str(&format!("    CALL \"{}\" USING {}\n", task.entry_point, using.join(" ")));
    out.push_str("    END-CALL\n");
    out.push_str(&format!("    DISPLAY {}\n", task.result_name));
    out.push_str("    STOP RUN.\n");
    Ok(out)
}

/// Runs every test of `task` against the compiled module at `module`.
/// Each driver is built under `<work_root>/<test_id>/`.
pub fn run_tests(
    task: &Task,
    module: &Path,
    toolchain: &dyn Toolchain,
    work_root: &Path,
    timeout: Duration,
) -> Result<Vec<TestResult>, EvalError> {
    let library_dir = module
        .parent()
        .ok_or_else(|| EvalError::Template(format!("module path {} has no parent", module.display())))?;
    let mut results = Vec::with_capacity(task.tests.len());
    for case in &task.tests {
        let start = Instant::now();
        let driver = driver_source(task, case)?;
        let workdir = work_root.join(&case.test_id);
        let req = CompileRequest { source: &driver, mode: CompileMode::Executable, workdir: &workdir, stem: "driver" };
        let compiled = toolchain.compile(&req)?;
        let expected = case.expected_output.clone();
        let (actual, failure) = match compiled.artifact_path.as_deref() {
            Some(exe) if compiled.succeeded() => {
                let run = toolchain.execute(&ExecRequest { executable: exe, library_dir, timeout })?;
                let actual = normalize_output(&run.stdout);
                let failure = if run.timed_out {
                    Some(TestFailure::Timeout)
                } else if run.exit_code != Some(0) {
                    Some(TestFailure::RuntimeError)
                } else if actual != normalize_output(&expected) {
                    Some(TestFailure::WrongOutput)
                } else {
                    None
                };
                (actual, failure)
            }
            _ => (String::new(), Some(TestFailure::DriverCompileError)),
        };
        debug!(task = %task.id, test = %case.test_id, ?failure, "test finished");
        results.push(TestResult {
            test_id: case.test_id.clone(),
            passed: failure.is_none(),
            actual_output: actual,
            expected_output: expected,
            runtime_ms: start.elapsed().as_millis() as u64,
            failure,
        });
    }
    Ok(results)
}
