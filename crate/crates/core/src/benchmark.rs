//! Benchmark task sets: loading, validation and generation prompts.
//!
//! A task set is one JSON document:
//!
//! ```json
//! {
//!   "name": "coboleval",
//!   "tasks": [
//!     {
//!       "id": "HumanEval/0",
//!       "description": "...",
//!       "template_source": "       IDENTIFICATION DIVISION. ...",
//!       "entry_point": "HAS-CLOSE-ELEMENTS",
//!       "result_name": "RESULT",
//!       "tests": [
//!         {
//!           "test_id": "t1",
//!           "input_bindings": [
//!             { "name": "L-COUNT", "value": "3", "picture": "9(3)" }
//!           ],
//!           "expected_output": "1"
//!         }
//!       ]
//!     }
//!   ]
//! }
//! ```
//!
//! Input bindings are marshalled by the test driver: the driver copies the
//! template's LINKAGE SECTION into its own WORKING-STORAGE, `MOVE`s each
//! binding value into the named item (subscripts such as `L-NUMBERS(2)` are
//! allowed), CALLs `entry_point` with the template's `USING` list and
//! DISPLAYs `result_name`. Values whose picture is alphanumeric (`X`/`A`)
//! are quoted automatically unless already written as a literal.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::ChatMessage;
use crate::source;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("benchmark path {0} does not exist or holds no task-set files")]
    MissingPath(PathBuf),
    #[error("malformed task {id}: {reason}")]
    MalformedTask { id: String, reason: String },
    #[error("cannot parse task set {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputBinding {
    pub name: String,
    pub value: String,
    pub picture: String,
}

impl InputBinding {
    /// The value as a COBOL literal suitable for `MOVE <lit> TO <name>`.
    pub fn literal(&self) -> String {
        let pic = self.picture.trim().to_ascii_uppercase();
        let alphanumeric = pic.starts_with('X') || pic.starts_with('A');
        let quoted = self.value.starts_with('"') || self.value.starts_with('\'');
        if alphanumeric && !quoted {
            format!("\"{}\"", self.value.replace('"', "\"\""))
        } else {
            self.value.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub test_id: String,
    pub input_bindings: Vec<InputBinding>,
    pub expected_output: String,
}

fn default_result_name() -> String {
    "RESULT".to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub description: String,
    pub template_source: String,
    pub entry_point: String,
    /// LINKAGE item the driver DISPLAYs after the call.
    #[serde(default = "default_result_name")]
    pub result_name: String,
    pub tests: Vec<TestCase>,
}

impl Task {
    fn validate(&self) -> Result<(), BenchmarkError> {
        let fail = |reason: &str| BenchmarkError::MalformedTask {
            id: if self.id.is_empty() { "<empty>".into() } else { self.id.clone() },
            reason: reason.to_string(),
        };
        if self.id.trim().is_empty() {
            return Err(fail("id is empty"));
        }
        if source::count_division_headers(&self.template_source, "IDENTIFICATION") == 0 {
            return Err(fail("template_source has no IDENTIFICATION DIVISION header"));
        }
        if self.entry_point.trim().is_empty() {
            return Err(fail("entry_point is empty"));
        }
        if self.tests.is_empty() {
            return Err(fail("tests is empty"));
        }
        let mut ids = HashSet::new();
        for t in &self.tests {
            if !ids.insert(t.test_id.as_str()) {
                return Err(fail(&format!("duplicate test_id {}", t.test_id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    #[serde(default)]
    pub name: String,
    pub tasks: Vec<Task>,
}

/// Loads a task set from a JSON file, or from every `*.json` file in a
/// directory. Tasks are validated and returned sorted by id.
pub fn load_benchmark(path: &Path) -> Result<Vec<Task>, BenchmarkError> {
    if !path.exists() {
        return Err(BenchmarkError::MissingPath(path.to_path_buf()));
    }
    let files = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|source| BenchmarkError::Io { path: path.to_path_buf(), source })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(BenchmarkError::MissingPath(path.to_path_buf()));
    }

    let mut tasks = Vec::new();
    for file in files {
        let text = fs::read_to_string(&file)
            .map_err(|source| BenchmarkError::Io { path: file.clone(), source })?;
        let set: TaskSet = serde_json::from_str(&text)
            .map_err(|source| BenchmarkError::Parse { path: file.clone(), source })?;
        tasks.extend(set.tasks);
    }
    validate_tasks(&mut tasks)?;
    Ok(tasks)
}

/// Validates invariants and sorts by id.
pub fn validate_tasks(tasks: &mut [Task]) -> Result<(), BenchmarkError> {
    let mut seen = HashSet::new();
    for task in tasks.iter() {
        task.validate()?;
        if !seen.insert(task.id.clone()) {
            return Err(BenchmarkError::MalformedTask {
                id: task.id.clone(),
                reason: "duplicate task id".into(),
            });
        }
    }
    tasks.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(())
}

/// Writes `tasks` as a single task-set document.
pub fn save_task_set(path: &Path, name: &str, tasks: &[Task]) -> Result<(), BenchmarkError> {
    let set = TaskSet { name: name.to_string(), tasks: tasks.to_vec() };
    let text = serde_json::to_string_pretty(&set).expect("task set serializes");
    fs::write(path, text + "\n").map_err(|source| BenchmarkError::Io { path: path.to_path_buf(), source })
}

const GENERATION_SYSTEM: &str = "You are an expert COBOL programmer. Write complete, compilable GnuCOBOL programs.";

/// Builds the initial generation prompt: the task description followed by
/// the template the solution must complete.
pub fn render_generation_prompt(task: &Task) -> Vec<ChatMessage> {
    let mut user = String::new();
    user.push_str("Complete the following COBOL program so that it solves the task below. ");
    user.push_str("Keep the PROGRAM-ID and the LINKAGE SECTION unchanged and return the whole program in a single ```cobol code block.\n\n");
    user.push_str("Task Description:\n");
    user.push_str(&task.description);
    if !task.description.ends_with('\n') {
        user.push('\n');
    }
    user.push_str("\nCOBOL Template:\n");
    user.push_str(&task.template_source);
    if !task.template_source.ends_with('\n') {
        user.push('\n');
    }
    vec![ChatMessage::system(GENERATION_SYSTEM), ChatMessage::user(user)]
}
