//! Compiling candidate COBOL and running the resulting programs.
//!
//! All compiler access goes through the [`Toolchain`] trait. [`GnuCobol`]
//! drives a real `cobc`; [`ReplayToolchain`] serves previously recorded
//! compiler logs and program outputs keyed by content digest, and
//! [`RecordingToolchain`] produces those recordings from any other
//! toolchain. [`StubToolchain`] is a closure-backed double for tests.

mod diagnostic;
mod gnucobol;
mod process;
mod replay;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diagnostic::{
    flag_external, format_error_log, parse_diagnostics, Diagnostic, EmptyLog, ParsedLog, Severity,
};
pub use gnucobol::{GnuCobol, COMPILER_ENV};
pub use replay::{
    compile_key, run_key, RecordingToolchain, ReplayToolchain, StubToolchain, ToolchainRecord,
};

/// Wall-clock budget for one compiler invocation.
pub const COMPILE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum CompilerError {
    #[error("compiler not found: {0}")]
    CompilerNotFound(String),
    #[error("compiler exceeded {0:?}")]
    Timeout(Duration),
    #[error("workdir {0} is already in use by another compile")]
    WorkdirInUse(PathBuf),
    #[error("workdir {0} is not empty")]
    WorkdirNotEmpty(PathBuf),
    #[error("no recorded toolchain entry for key {0}")]
    ReplayMiss(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CompilerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CompilerError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompileMode {
    /// A standalone program (`cobc -x`).
    Executable,
    /// A dynamically loadable subprogram (`cobc -m`).
    Module,
}

impl CompileMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CompileMode::Executable => "executable",
            CompileMode::Module => "module",
        }
    }

    /// Output file name for a compile of `stem` in this mode.
    pub fn artifact_name(self, stem: &str) -> String {
        match self {
            CompileMode::Executable if cfg!(windows) => format!("{stem}.exe"),
            CompileMode::Executable => stem.to_string(),
            CompileMode::Module if cfg!(windows) => format!("{stem}.dll"),
            CompileMode::Module => format!("{stem}.so"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompileStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOutcome {
    pub status: CompileStatus,
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_path: Option<PathBuf>,
    pub raw_log: String,
}

impl CompileOutcome {
    pub fn succeeded(&self) -> bool {
        self.status == CompileStatus::Success
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    /// Builds an outcome from a raw log. Status is derived from the parsed
    /// diagnostics so that failure holds exactly when an error is present.
    /// A non-zero exit without any parseable error, or a success without an
    /// artifact, appends a driver-level error line to the log.
    pub(crate) fn from_log(
        mut raw_log: String,
        candidate: &str,
        exit_ok: bool,
        artifact: Option<PathBuf>,
    ) -> Self {
        let mut parsed = parse_diagnostics(&raw_log);
        let has_error = parsed.diagnostics.iter().any(Diagnostic::is_error);
        let synthetic = if !has_error && !exit_ok {
            Some("compiler exited unsuccessfully without diagnostics")
        } else if !has_error && artifact.is_none() {
            Some("compiler produced no artifact")
        } else {
            None
        };
        if let Some(msg) = synthetic {
            if !raw_log.is_empty() && !raw_log.ends_with('\n') {
                raw_log.push('\n');
            }
            raw_log.push_str(&format!("cobc: error: {msg}\n"));
            parsed = parse_diagnostics(&raw_log);
        }
        let mut diagnostics = parsed.diagnostics;
        flag_external(&mut diagnostics, candidate);
        let failed = diagnostics.iter().any(Diagnostic::is_error);
        CompileOutcome {
            status: if failed { CompileStatus::Failure } else { CompileStatus::Success },
            diagnostics,
            artifact_path: if failed { None } else { artifact },
            raw_log,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompileRequest<'a> {
    pub source: &'a str,
    pub mode: CompileMode,
    /// Fresh directory for this compile. Created if missing; must be empty.
    pub workdir: &'a Path,
    /// File stem for `<stem>.cob`, `<stem>.log` and the artifact.
    pub stem: &'a str,
}

impl CompileRequest<'_> {
    pub fn source_file_name(&self) -> String {
        format!("{}.cob", self.stem)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExecRequest<'a> {
    pub executable: &'a Path,
    /// Directory searched for dynamically CALLed modules.
    pub library_dir: &'a Path,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: Option<i32>,
    pub timed_out: bool,
}

pub trait Toolchain: Send + Sync {
    fn compile(&self, req: &CompileRequest<'_>) -> Result<CompileOutcome, CompilerError>;
    fn execute(&self, req: &ExecRequest<'_>) -> Result<ExecOutcome, CompilerError>;
    /// Short human-readable identification (compiler version, session file).
    fn describe(&self) -> String;
}

impl<T: Toolchain + ?Sized> Toolchain for std::sync::Arc<T> {
    fn compile(&self, req: &CompileRequest<'_>) -> Result<CompileOutcome, CompilerError> {
        (**self).compile(req)
    }
    fn execute(&self, req: &ExecRequest<'_>) -> Result<ExecOutcome, CompilerError> {
        (**self).execute(req)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

fn active_workdirs() -> &'static Mutex<HashSet<PathBuf>> {
    static ACTIVE: OnceLock<Mutex<HashSet<PathBuf>>> = OnceLock::new();
    ACTIVE.get_or_init(Default::default)
}

/// Exclusive claim on a compile workdir, released on drop.
pub(crate) struct WorkdirClaim {
    path: PathBuf,
}

impl WorkdirClaim {
    /// Creates `dir` if needed and claims it. Fails if another compile holds
    /// it or it already has content.
    pub(crate) fn acquire(dir: &Path) -> Result<Self, CompilerError> {
        fs::create_dir_all(dir).map_err(|e| CompilerError::io(dir, e))?;
        let path = fs::canonicalize(dir).map_err(|e| CompilerError::io(dir, e))?;
        {
            let mut active = active_workdirs().lock().expect("workdir registry poisoned");
            if !active.insert(path.clone()) {
                return Err(CompilerError::WorkdirInUse(dir.to_path_buf()));
            }
        }
        let claim = WorkdirClaim { path };
        let non_empty = fs::read_dir(dir)
            .map_err(|e| CompilerError::io(dir, e))?
            .next()
            .is_some();
        if non_empty {
            return Err(CompilerError::WorkdirNotEmpty(dir.to_path_buf()));
        }
        Ok(claim)
    }
}

impl Drop for WorkdirClaim {
    fn drop(&mut self) {
        if let Ok(mut active) = active_workdirs().lock() {
            active.remove(&self.path);
        }
    }
}

/// Writes the candidate source into the claimed workdir.
pub(crate) fn write_source(req: &CompileRequest<'_>) -> Result<PathBuf, CompilerError> {
    let path = req.workdir.join(req.source_file_name());
    fs::write(&path, req.source).map_err(|e| CompilerError::io(&path, e))?;
    Ok(path)
}

pub(crate) fn write_log(req: &CompileRequest<'_>, raw_log: &str) -> Result<(), CompilerError> {
    let path = req.workdir.join(format!("{}.log", req.stem));
    fs::write(&path, raw_log).map_err(|e| CompilerError::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_status_follows_errors() {
        let ok = CompileOutcome::from_log(
            "p.cob:3: warning: x\n".into(),
            "p.cob",
            true,
            Some("p.so".into()),
        );
        assert!(ok.succeeded());
        assert_eq!(ok.artifact_path.as_deref(), Some(Path::new("p.so")));

        let bad = CompileOutcome::from_log("p.cob:3: error: x\n".into(), "p.cob", false, None);
        assert!(!bad.succeeded());
        assert_eq!(bad.error_count(), 1);
        assert!(bad.artifact_path.is_none());
    }

    #[test]
    fn silent_nonzero_exit_becomes_error() {
        let o = CompileOutcome::from_log(String::new(), "p.cob", false, None);
        assert!(!o.succeeded());
        assert_eq!(o.error_count(), 1);
        assert!(o.raw_log.contains("cobc: error:"));
    }

    #[test]
    fn claims_are_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let w = dir.path().join("w");
        let claim = WorkdirClaim::acquire(&w).unwrap();
        assert!(matches!(WorkdirClaim::acquire(&w), Err(CompilerError::WorkdirInUse(_))));
        drop(claim);
        fs::write(w.join("f"), "x").unwrap();
        assert!(matches!(WorkdirClaim::acquire(&w), Err(CompilerError::WorkdirNotEmpty(_))));
    }
}
