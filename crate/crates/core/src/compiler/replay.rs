use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    write_log, write_source, CompileMode, CompileOutcome, CompileRequest, CompilerError, ExecOutcome,
    ExecRequest, Toolchain, WorkdirClaim,
};
use crate::digest::sha256_parts;

const ARTIFACT_PREFIX: &str = "cobolassist-artifact:";

/// Content key of a compile: digest of mode and exact source text.
pub fn compile_key(source: &str, mode: CompileMode) -> String {
    sha256_parts(&["compile", mode.as_str(), source])
}

/// Content key of a run: the executable's compile key plus the sorted
/// compile keys of every module visible on the library path.
pub fn run_key(executable_key: &str, module_keys: &[String]) -> String {
    let mut modules = module_keys.to_vec();
    modules.sort();
    sha256_parts(&["run", executable_key, &modules.join(",")])
}

/// One line of a recorded toolchain session (JSON lines).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ToolchainRecord {
    Compile {
        key: String,
        mode: CompileMode,
        exit_ok: bool,
        raw_log: String,
    },
    Run {
        key: String,
        stdout: String,
        #[serde(default)]
        stderr: String,
        exit_code: Option<i32>,
        #[serde(default)]
        timed_out: bool,
    },
}

impl ToolchainRecord {
    pub fn key(&self) -> &str {
        match self {
            ToolchainRecord::Compile { key, .. } | ToolchainRecord::Run { key, .. } => key,
        }
    }
}

fn module_keys(library_dir: &Path) -> Result<Vec<String>, CompilerError> {
    let ext = CompileMode::Module.artifact_name("x");
    let ext = ext.rsplit('.').next().unwrap_or("so");
    let mut keys = Vec::new();
    let entries = fs::read_dir(library_dir).map_err(|e| CompilerError::io(library_dir, e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths {
        if p.extension().is_some_and(|e| e == ext) {
            keys.push(read_artifact_key(&p)?);
        }
    }
    Ok(keys)
}

fn read_artifact_key(path: &Path) -> Result<String, CompilerError> {
    let text = fs::read_to_string(path).map_err(|e| CompilerError::io(path, e))?;
    Ok(text.strip_prefix(ARTIFACT_PREFIX).unwrap_or(&text).trim().to_string())
}

fn write_artifact(req: &CompileRequest<'_>, content: &str) -> Result<PathBuf, CompilerError> {
    let path = req.workdir.join(req.mode.artifact_name(req.stem));
    fs::write(&path, format!("{ARTIFACT_PREFIX}{content}")).map_err(|e| CompilerError::io(&path, e))?;
    Ok(path)
}

/// Serves compiler logs and program output from a recorded session.
///
/// Artifacts written by a replayed compile are small placeholder files that
/// carry the compile key, so a later replayed run can be looked up.
#[derive(Debug)]
pub struct ReplayToolchain {
    origin: String,
    compiles: HashMap<String, (bool, String)>,
    runs: HashMap<String, ExecOutcome>,
}

impl ReplayToolchain {
    pub fn from_records(origin: impl Into<String>, records: impl IntoIterator<Item = ToolchainRecord>) -> Self {
        let mut compiles = HashMap::new();
        let mut runs = HashMap::new();
        for r in records {
            match r {
                ToolchainRecord::Compile { key, exit_ok, raw_log, .. } => {
                    compiles.insert(key, (exit_ok, raw_log));
                }
                ToolchainRecord::Run { key, stdout, stderr, exit_code, timed_out } => {
                    runs.insert(key, ExecOutcome { stdout, stderr, exit_code, timed_out });
                }
            }
        }
        ReplayToolchain { origin: origin.into(), compiles, runs }
    }

    pub fn open(path: &Path) -> Result<Self, CompilerError> {
        let file = File::open(path).map_err(|e| CompilerError::io(path, e))?;
        let mut records = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| CompilerError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ToolchainRecord = serde_json::from_str(&line).map_err(|e| {
                CompilerError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e))
            })?;
            records.push(rec);
        }
        Ok(Self::from_records(path.display().to_string(), records))
    }
}

impl Toolchain for ReplayToolchain {
    fn compile(&self, req: &CompileRequest<'_>) -> Result<CompileOutcome, CompilerError> {
        let key = compile_key(req.source, req.mode);
        let (exit_ok, raw_log) = self.compiles.get(&key).ok_or_else(|| CompilerError::ReplayMiss(key.clone()))?;
        let _claim = WorkdirClaim::acquire(req.workdir)?;
        write_source(req)?;
        let artifact = if *exit_ok { Some(write_artifact(req, &key)?) } else { None };
        let outcome = CompileOutcome::from_log(raw_log.clone(), &req.source_file_name(), *exit_ok, artifact);
        if !outcome.succeeded() {
            let _ = fs::remove_file(req.workdir.join(req.mode.artifact_name(req.stem)));
        }
        write_log(req, &outcome.raw_log)?;
        Ok(outcome)
    }

    fn execute(&self, req: &ExecRequest<'_>) -> Result<ExecOutcome, CompilerError> {
        let exe = read_artifact_key(req.executable)?;
        let key = run_key(&exe, &module_keys(req.library_dir)?);
        self.runs.get(&key).cloned().ok_or(CompilerError::ReplayMiss(key))
    }

    fn describe(&self) -> String {
        format!("replay {}", self.origin)
    }
}

/// Wraps a toolchain and appends every compile and run to a JSON-lines
/// session that [`ReplayToolchain`] can serve later.
pub struct RecordingToolchain<T> {
    inner: T,
    writer: Mutex<File>,
    artifacts: Mutex<HashMap<PathBuf, String>>,
}

impl<T: Toolchain> RecordingToolchain<T> {
    pub fn new(inner: T, session: &Path) -> Result<Self, CompilerError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(session)
            .map_err(|e| CompilerError::io(session, e))?;
        Ok(RecordingToolchain { inner, writer: Mutex::new(file), artifacts: Mutex::new(HashMap::new()) })
    }

    fn append(&self, rec: &ToolchainRecord) -> Result<(), CompilerError> {
        let mut line = serde_json::to_string(rec).expect("record serializes");
        line.push('\n');
        let mut w = self.writer.lock().expect("recording writer poisoned");
        w.write_all(line.as_bytes()).map_err(|e| CompilerError::io(Path::new("<session>"), e))
    }
}

impl<T: Toolchain> Toolchain for RecordingToolchain<T> {
    fn compile(&self, req: &CompileRequest<'_>) -> Result<CompileOutcome, CompilerError> {
        let outcome = self.inner.compile(req)?;
        let key = compile_key(req.source, req.mode);
        if let Some(a) = &outcome.artifact_path {
            self.artifacts.lock().expect("artifact map poisoned").insert(a.clone(), key.clone());
        }
        self.append(&ToolchainRecord::Compile {
            key,
            mode: req.mode,
            exit_ok: outcome.succeeded(),
            raw_log: outcome.raw_log.clone(),
        })?;
        Ok(outcome)
    }

    fn execute(&self, req: &ExecRequest<'_>) -> Result<ExecOutcome, CompilerError> {
        let out = self.inner.execute(req)?;
        let (exe, modules) = {
            let map = self.artifacts.lock().expect("artifact map poisoned");
            let exe = map.get(req.executable).cloned().unwrap_or_default();
            let modules: Vec<String> = map
                .iter()
                .filter(|(p, _)| p.parent() == Some(req.library_dir) && p.as_path() != req.executable)
                .map(|(_, k)| k.clone())
                .collect();
            (exe, modules)
        };
        self.append(&ToolchainRecord::Run {
            key: run_key(&exe, &modules),
            stdout: out.stdout.clone(),
            stderr: out.stderr.clone(),
            exit_code: out.exit_code,
            timed_out: out.timed_out,
        })?;
        Ok(out)
    }

    fn describe(&self) -> String {
        format!("{} (recording)", self.inner.describe())
    }
}

type CompileFn = dyn Fn(&str, CompileMode) -> String + Send + Sync;
type RunFn = dyn Fn(&str, &[String]) -> ExecOutcome + Send + Sync;

/// Closure-backed toolchain for tests.
///
/// The compile closure returns the raw log for a source (no error lines
/// means success). The run closure receives the executable's source and
/// the sources of every module in the library directory.
pub struct StubToolchain {
    compile_fn: Box<CompileFn>,
    run_fn: Box<RunFn>,
    compiles: AtomicUsize,
}

impl StubToolchain {
    pub fn new(
        compile_fn: impl Fn(&str, CompileMode) -> String + Send + Sync + 'static,
        run_fn: impl Fn(&str, &[String]) -> ExecOutcome + Send + Sync + 'static,
    ) -> Self {
        StubToolchain { compile_fn: Box::new(compile_fn), run_fn: Box::new(run_fn), compiles: AtomicUsize::new(0) }
    }

    /// A toolchain whose compiles fail with one syntax error whenever the
    /// source contains `marker`, and whose runs print nothing.
    pub fn failing_on(marker: &'static str) -> Self {
        Self::new(
            move |src, _| match src.lines().position(|l| l.contains(marker)) {
                Some(i) => format!("prog.cob:{}: error: syntax error, unexpected Identifier\n", i + 1),
                None => String::new(),
            },
            |_, _| ExecOutcome { stdout: String::new(), stderr: String::new(), exit_code: Some(0), timed_out: false },
        )
    }

    pub fn compile_count(&self) -> usize {
        self.compiles.load(Ordering::SeqCst)
    }
}

impl Toolchain for StubToolchain {
    fn compile(&self, req: &CompileRequest<'_>) -> Result<CompileOutcome, CompilerError> {
        self.compiles.fetch_add(1, Ordering::SeqCst);
        let _claim = WorkdirClaim::acquire(req.workdir)?;
        write_source(req)?;
        let log = (self.compile_fn)(req.source, req.mode);
        let artifact = write_artifact(req, req.source)?;
        let file = req.source_file_name();
        // Stub logs are written against "prog.cob"; retarget to the real file.
        let log = log.replace("prog.cob:", &format!("{file}:"));
        let outcome = CompileOutcome::from_log(log, &file, true, Some(artifact.clone()));
        if !outcome.succeeded() {
            let _ = fs::remove_file(&artifact);
        }
        write_log(req, &outcome.raw_log)?;
        Ok(outcome)
    }

    fn execute(&self, req: &ExecRequest<'_>) -> Result<ExecOutcome, CompilerError> {
        let exe = fs::read_to_string(req.executable).map_err(|e| CompilerError::io(req.executable, e))?;
        let exe = exe.strip_prefix(ARTIFACT_PREFIX).unwrap_or(&exe).to_string();
        let ext = CompileMode::Module.artifact_name("x");
        let ext = ext.rsplit('.').next().unwrap_or("so").to_string();
        let mut modules = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(req.library_dir)
            .map_err(|e| CompilerError::io(req.library_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| *e == *ext))
            .collect();
        paths.sort();
        for p in paths {
            let text = fs::read_to_string(&p).map_err(|e| CompilerError::io(&p, e))?;
            modules.push(text.strip_prefix(ARTIFACT_PREFIX).unwrap_or(&text).to_string());
        }
        Ok((self.run_fn)(&exe, &modules))
    }

    fn describe(&self) -> String {
        "stub".into()
    }
}
