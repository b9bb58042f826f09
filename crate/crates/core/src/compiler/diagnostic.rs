use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Note,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "error" => Some(Severity::Error),
            "warning" => Some(Severity::Warning),
            "note" => Some(Severity::Note),
            _ => None,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One compiler message.
///
/// `line` is 0 for driver-level messages (`cobc: error: ...`) that carry no
/// source position; those are always flagged `external`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub line: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<u32>,
    pub severity: Severity,
    pub message: String,
    /// Set when the message refers to a file other than the compiled
    /// candidate (a copybook, or the compiler driver itself).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub external: bool,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Result of scanning one raw compiler log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedLog {
    pub diagnostics: Vec<Diagnostic>,
    /// Non-empty lines that matched neither message shape (context lines,
    /// caret excerpts, `in paragraph` headers).
    pub unrecognized: usize,
}

fn located_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(?P<path>[^\s:][^:]*):(?P<line>\d+):(?:(?P<col>\d+):)?\s*(?P<sev>error|warning|note):\s?(?P<msg>.*)$")
            .unwrap()
    })
}

fn driver_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^cobc:\s*(?P<sev>error|warning|note):\s?(?P<msg>.*)$").unwrap())
}

/// Parses GnuCOBOL's `<path>:<line>: <severity>: <message>` lines.
///
/// Lines of the form `cobc: error: ...` are accepted as driver-level
/// diagnostics with line 0. Everything else is counted in
/// [`ParsedLog::unrecognized`] and otherwise ignored. Never fails.
pub fn parse_diagnostics(raw_log: &str) -> ParsedLog {
    let mut out = ParsedLog::default();
    for line in raw_log.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(c) = driver_re().captures(line) {
            out.diagnostics.push(Diagnostic {
                path: "cobc".into(),
                line: 0,
                column: None,
                severity: Severity::parse(&c["sev"]).expect("regex alternation"),
                message: c["msg"].trim_end().to_string(),
                external: true,
            });
            continue;
        }
        match located_re().captures(line) {
            Some(c) => {
                let Ok(line_no) = c["line"].parse::<u32>() else {
                    out.unrecognized += 1;
                    continue;
                };
                if line_no == 0 {
                    out.unrecognized += 1;
                    continue;
                }
                out.diagnostics.push(Diagnostic {
                    path: c["path"].to_string(),
                    line: line_no,
                    column: c.name("col").and_then(|m| m.as_str().parse().ok()),
                    severity: Severity::parse(&c["sev"]).expect("regex alternation"),
                    message: c["msg"].trim_end().to_string(),
                    external: false,
                });
            }
            None => out.unrecognized += 1,
        }
    }
    out
}

/// Marks diagnostics whose path is not `candidate` as external.
pub fn flag_external(diagnostics: &mut [Diagnostic], candidate: &str) {
    let candidate_name = file_name(candidate);
    for d in diagnostics {
        if d.path == "cobc" || file_name(&d.path) != candidate_name {
            d.external = true;
        }
    }
}

fn file_name(p: &str) -> &str {
    p.rsplit(['/', '\\']).next().unwrap_or(p)
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("cannot format an empty diagnostic list")]
pub struct EmptyLog;

/// Renders diagnostics as `line <n>: <severity>: <message>`, one per line.
pub fn format_error_log(diagnostics: &[Diagnostic]) -> Result<String, EmptyLog> {
    if diagnostics.is_empty() {
        return Err(EmptyLog);
    }
    let mut out = String::new();
    for d in diagnostics {
        out.push_str(&format!("line {}: {}: {}\n", d.line, d.severity, d.message));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_single_error() {
        let p = parse_diagnostics("prog.cob:41: error: syntax error, unexpected PROCEDURE\n");
        assert_eq!(p.diagnostics.len(), 1);
        let d = &p.diagnostics[0];
        assert_eq!((d.path.as_str(), d.line, d.severity), ("prog.cob", 41, Severity::Error));
        assert_eq!(d.message, "syntax error, unexpected PROCEDURE");
        assert_eq!(d.column, None);
    }

    #[test]
    fn empty_log_is_empty() {
        assert_eq!(parse_diagnostics(""), ParsedLog::default());
    }

    #[test]
    fn context_lines_are_counted_not_parsed() {
        let log = "prog.cob: in paragraph 'MAIN-PARA':\n\
                   prog.cob:12: error: 'X' is not defined\n\
                   prog.cob:14: warning: numeric value is expected [-Wothers]\n";
        let p = parse_diagnostics(log);
        assert_eq!(p.diagnostics.len(), 2);
        assert_eq!(p.unrecognized, 1);
        assert_eq!(p.diagnostics[1].severity, Severity::Warning);
    }

    #[test]
    fn column_and_driver_messages() {
        let p = parse_diagnostics("a.cob:3:7: note: here\ncobc: error: a.cob: No such file or directory\n");
        assert_eq!(p.diagnostics[0].column, Some(7));
        assert_eq!(p.diagnostics[1].line, 0);
        assert!(p.diagnostics[1].external);
    }

    #[test]
    fn external_flag_uses_file_name() {
        let mut d = parse_diagnostics("work/prog.cob:1: error: x\nCOPYBK.cpy:2: error: y\n").diagnostics;
        flag_external(&mut d, "prog.cob");
        assert!(!d[0].external);
        assert!(d[1].external);
    }

    #[test]
    fn format_preserves_order() {
        let d = parse_diagnostics("p.cob:3: error: a\np.cob:1: warning: b\np.cob:2: error: c\n").diagnostics;
        assert_eq!(
            format_error_log(&d).unwrap(),
            "line 3: error: a\nline 1: warning: b\nline 2: error: c\n"
        );
        assert_eq!(format_error_log(&[]), Err(EmptyLog));
    }
}
