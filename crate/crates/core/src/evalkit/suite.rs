use std::collections::HashMap;
use std::fs;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use tracing::warn;

use super::driver::run_tests;
use super::report::TaskResult;
use super::EvalError;
use crate::benchmark::Task;
use crate::llm::Backend;
use crate::repairloop::{run_task, Initial, LoopEnv, RepairConfig, RepairError};

/// Runs the loop for one task, tests the final module when it compiled,
/// and persists the trace. Compiler environment failures abort only this
/// task; generation failures are returned as errors.
pub fn evaluate_task(
    task: &Task,
    backend: &dyn Backend,
    env: LoopEnv<'_>,
    config: &RepairConfig,
    initial: Initial,
    test_timeout: Duration,
) -> Result<TaskResult, EvalError> {
    let trace = match run_task(task, backend, env, config, initial) {
        Ok(t) => t,
        Err(RepairError::Compiler(e)) => {
            warn!(task = %task.id, error = %e, "task aborted");
            return Ok(TaskResult::aborted(&task.id, e.to_string()));
        }
        Err(e) => return Err(e.into()),
    };
    trace.persist(env.run_dir)?;

    let mut result = TaskResult {
        task_id: task.id.clone(),
        compiled: trace.compiled(),
        solved: false,
        trace: None,
        test_results: Vec::new(),
        aborted: None,
    };
    if let (true, Some(rel)) = (trace.compiled(), trace.last().outcome.artifact_path.as_ref()) {
        let module = env.run_dir.join(rel);
        let work_root = env.run_dir.join(&task.id).join("tests");
        match run_tests(task, &module, env.toolchain, &work_root, test_timeout) {
            Ok(tests) => {
                result.solved = !tests.is_empty() && tests.iter().all(|t| t.passed);
                result.test_results = tests;
            }
            Err(EvalError::Compiler(e)) => {
                warn!(task = %task.id, error = %e, "test run aborted");
                result.aborted = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    let tests_path = env.run_dir.join(&task.id).join("tests.json");
    let text = serde_json::to_string_pretty(&result.test_results).expect("test results serialize");
    fs::write(&tests_path, text + "\n").map_err(|source| EvalError::Io { path: tests_path, source })?;
    result.trace = Some(trace);
    Ok(result)
}

/// Evaluates all tasks on up to `concurrency` worker threads. Results come
/// back sorted by task id. `initial` supplies externally produced round-0
/// replies by task id.
pub fn run_suite(
    tasks: &[Task],
    backend: &dyn Backend,
    env: LoopEnv<'_>,
    config: &RepairConfig,
    concurrency: usize,
    initial: Option<&HashMap<String, String>>,
    test_timeout: Duration,
) -> Result<Vec<TaskResult>, EvalError> {
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let results = Mutex::new(Vec::with_capacity(tasks.len()));
    let first_error = Mutex::new(None);
    let workers = concurrency.clamp(1, tasks.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let start = match initial.and_then(|m| m.get(&task.id)) {
                    Some(reply) => Initial::Given(reply.clone()),
                    None => Initial::Generate,
                };
                match evaluate_task(task, backend, env, config, start, test_timeout) {
                    Ok(r) => results.lock().expect("results poisoned").push(r),
                    Err(e) => {
                        failed.store(true, Ordering::SeqCst);
                        first_error.lock().expect("error slot poisoned").get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().expect("error slot poisoned") {
        return Err(e);
    }
    let mut out = results.into_inner().expect("results poisoned");
    out.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    Ok(out)
}
