use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use tracing::debug;

use super::process::run_with_timeout;
use super::{
    write_log, write_source, CompileMode, CompileOutcome, CompileRequest, CompilerError, ExecOutcome,
    ExecRequest, Toolchain, WorkdirClaim, COMPILE_TIMEOUT,
};

/// Environment variable naming the `cobc` executable.
pub const COMPILER_ENV: &str = "COBOLASSIST_COBC";

/// The GnuCOBOL `cobc` driver.
///
/// Sources are compiled free-format (`-free`); modules with `-m`,
/// executables with `-x`. Diagnostics are read from the compiler's
/// standard error.
#[derive(Debug, Clone)]
pub struct GnuCobol {
    program: PathBuf,
    timeout: Duration,
}

impl GnuCobol {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        GnuCobol { program: program.into(), timeout: COMPILE_TIMEOUT }
    }

    /// `cobc` from [`COMPILER_ENV`], falling back to the `PATH` lookup.
    pub fn from_env() -> Self {
        Self::new(std::env::var_os(COMPILER_ENV).map(PathBuf::from).unwrap_or_else(|| "cobc".into()))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn program(&self) -> &Path {
        &self.program
    }

    /// First line of `cobc --version`, or `CompilerNotFound`.
    pub fn version(&self) -> Result<String, CompilerError> {
        let mut cmd = Command::new(&self.program);
        cmd.arg("--version");
        let captured = run_with_timeout(cmd, self.timeout).map_err(|e| self.spawn_error(e))?;
        if captured.timed_out {
            return Err(CompilerError::Timeout(self.timeout));
        }
        Ok(captured.stdout.lines().next().unwrap_or_default().to_string())
    }

    fn spawn_error(&self, e: std::io::Error) -> CompilerError {
        if e.kind() == ErrorKind::NotFound || e.kind() == ErrorKind::PermissionDenied {
            CompilerError::CompilerNotFound(self.program.display().to_string())
        } else {
            CompilerError::io(&self.program, e)
        }
    }

    fn args(mode: CompileMode, output: &str, source: &str) -> Vec<String> {
        let mode_flag = match mode {
            CompileMode::Executable => "-x",
            CompileMode::Module => "-m",
        };
        vec!["-free".into(), mode_flag.into(), "-o".into(), output.into(), source.into()]
    }
}

impl Toolchain for GnuCobol {
    fn compile(&self, req: &CompileRequest<'_>) -> Result<CompileOutcome, CompilerError> {
        let _claim = WorkdirClaim::acquire(req.workdir)?;
        write_source(req)?;
        let file = req.source_file_name();
        let artifact = req.mode.artifact_name(req.stem);
        let mut cmd = Command::new(&self.program);
        cmd.current_dir(req.workdir).args(Self::args(req.mode, &artifact, &file));
        debug!(workdir = %req.workdir.display(), mode = req.mode.as_str(), "running cobc");
        let captured = run_with_timeout(cmd, self.timeout).map_err(|e| self.spawn_error(e))?;
        if captured.timed_out {
            return Err(CompilerError::Timeout(self.timeout));
        }
        let mut raw_log = captured.stderr;
        if !captured.stdout.trim().is_empty() {
            raw_log.push_str(&captured.stdout);
        }
        let artifact_path = req.workdir.join(&artifact);
        let exit_ok = captured.status.is_some_and(|s| s.success());
        let outcome = CompileOutcome::from_log(
            raw_log,
            &file,
            exit_ok,
            artifact_path.exists().then_some(artifact_path),
        );
        write_log(req, &outcome.raw_log)?;
        Ok(outcome)
    }

    fn execute(&self, req: &ExecRequest<'_>) -> Result<ExecOutcome, CompilerError> {
        let mut cmd = Command::new(req.executable);
        cmd.env("COB_LIBRARY_PATH", req.library_dir);
        if let Some(dir) = req.executable.parent() {
            cmd.current_dir(dir);
        }
        let captured =
            run_with_timeout(cmd, req.timeout).map_err(|e| CompilerError::io(req.executable, e))?;
        Ok(ExecOutcome {
            stdout: captured.stdout,
            stderr: captured.stderr,
            exit_code: captured.status.and_then(|s| s.code()),
            timed_out: captured.timed_out,
        })
    }

    fn describe(&self) -> String {
        match self.version() {
            Ok(v) => format!("{} ({v})", self.program.display()),
            Err(_) => self.program.display().to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_select_mode() {
        assert_eq!(GnuCobol::args(CompileMode::Module, "A.so", "A.cob"), ["-free", "-m", "-o", "A.so", "A.cob"]);
        assert_eq!(GnuCobol::args(CompileMode::Executable, "d", "d.cob")[1], "-x");
    }

    #[test]
    fn missing_compiler_is_environment_error() {
        let dir = tempfile::tempdir().unwrap();
        let cobc = GnuCobol::new("/nonexistent/cobc-for-test");
        let req = CompileRequest {
            source: "       IDENTIFICATION DIVISION.\n",
            mode: CompileMode::Module,
            workdir: &dir.path().join("w"),
            stem: "P",
        };
        assert!(matches!(cobc.compile(&req), Err(CompilerError::CompilerNotFound(_))));
        assert!(matches!(cobc.version(), Err(CompilerError::CompilerNotFound(_))));
    }
}
