//! Lightweight line scanning over COBOL source text.
//!
//! Nothing here is a COBOL parser. The helpers answer narrow questions
//! ("how many LINKAGE SECTION headers are there", "is an inline PERFORM
//! still open at line 40") that the taxonomy rules and the test driver
//! generator need. Both fixed- and free-format layouts are accepted as long
//! as comments use `*>` or a `*` in the indicator column.

use std::sync::OnceLock;

use regex::Regex;

/// One physical source line with comments removed and case folded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLine {
    /// 1-based line number.
    pub number: usize,
    pub raw: String,
    /// Upper-cased code text with comments stripped, trimmed.
    pub code: String,
}

/// Splits `source` into lines and strips comments.
pub fn lines(source: &str) -> Vec<SourceLine> {
    source
        .lines()
        .enumerate()
        .map(|(i, raw)| SourceLine {
            number: i + 1,
            raw: raw.to_string(),
            code: strip_comment(raw).trim().to_ascii_uppercase(),
        })
        .collect()
}

fn strip_comment(raw: &str) -> &str {
    let code = match find_outside_literal(raw, "*>") {
        Some(idx) => &raw[..idx],
        None => raw,
    };
    // Fixed-format indicator column comment.
    let bytes = code.as_bytes();
    if bytes.len() >= 7 && bytes[..6].iter().all(|b| b.is_ascii_whitespace() || b.is_ascii_digit()) {
        if matches!(bytes[6], b'*' | b'/') {
            return "";
        }
    }
    if code.trim_start().starts_with('*') && !code.trim_start().starts_with("**") {
        return "";
    }
    code
}

fn find_outside_literal(raw: &str, needle: &str) -> Option<usize> {
    let mut quote: Option<char> = None;
    for (idx, ch) in raw.char_indices() {
        match quote {
            Some(q) if ch == q => quote = None,
            Some(_) => {}
            None if ch == '"' || ch == '\'' => quote = Some(ch),
            None if raw[idx..].starts_with(needle) => return Some(idx),
            None => {}
        }
    }
    None
}

/// Removes string literals so keyword scans do not look inside them.
pub fn without_literals(code: &str) -> String {
    let mut out = String::with_capacity(code.len());
    let mut quote: Option<char> = None;
    for ch in code.chars() {
        match quote {
            Some(q) if ch == q => {
                quote = None;
                out.push_str("\"\"");
            }
            Some(_) => {}
            None if ch == '"' || ch == '\'' => quote = Some(ch),
            None => out.push(ch),
        }
    }
    out
}

/// Whitespace-separated words of a code line, with separators trimmed.
pub fn words(code: &str) -> Vec<String> {
    without_literals(code)
        .split(|c: char| c.is_whitespace() || c == '(' || c == ')' || c == ',')
        .map(|w| w.trim_end_matches('.').to_string())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Number of lines whose code starts with `<name> SECTION`.
pub fn count_section_headers(source: &str, name: &str) -> usize {
    let header = format!("{} SECTION", name.to_ascii_uppercase());
    lines(source)
        .iter()
        .filter(|l| l.code.starts_with(&header))
        .count()
}

/// Number of lines whose code starts with `<name> DIVISION`.
pub fn count_division_headers(source: &str, name: &str) -> usize {
    let header = format!("{} DIVISION", name.to_ascii_uppercase());
    lines(source)
        .iter()
        .filter(|l| l.code.starts_with(&header))
        .count()
}

/// True when any section or division header appears more than once.
pub fn has_duplicate_header(source: &str) -> bool {
    let mut seen = std::collections::HashSet::new();
    for line in lines(source) {
        let Some(header) = header_name(&line.code) else { continue };
        if !seen.insert(header) {
            return true;
        }
    }
    false
}

fn header_name(code: &str) -> Option<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"^(IDENTIFICATION|ID|ENVIRONMENT|DATA|PROCEDURE|CONFIGURATION|INPUT-OUTPUT|FILE|WORKING-STORAGE|LOCAL-STORAGE|LINKAGE|SCREEN|REPORT)\s+(DIVISION|SECTION)\b")
            .unwrap()
    });
    re.captures(code).map(|c| format!("{} {}", &c[1], &c[2]))
}

/// True when the code line is a division, section or paragraph header, or an
/// `END PROGRAM` marker.
pub fn is_header_line(code: &str) -> bool {
    static PARA: OnceLock<Regex> = OnceLock::new();
    let para = PARA.get_or_init(|| Regex::new(r"^[A-Z0-9][A-Z0-9-]*\.$").unwrap());
    if code.contains(" DIVISION") || code.ends_with(" SECTION.") || code.starts_with("END PROGRAM") {
        return true;
    }
    para.is_match(code) && !is_terminator_keyword(code.trim_end_matches('.'))
}

fn is_terminator_keyword(word: &str) -> bool {
    word.starts_with("END-") || matches!(word, "GOBACK" | "EXIT" | "CONTINUE" | "ELSE" | "STOP")
}

/// True when the code line starts a data description entry (`01 X ...`).
pub fn is_data_entry(code: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(0?[1-9]|[1-4][0-9]|66|77|88)\s+\S").unwrap())
        .is_match(code)
}

/// Line number of the `PROCEDURE DIVISION` header, if any.
pub fn procedure_division_line(source: &str) -> Option<usize> {
    lines(source)
        .into_iter()
        .find(|l| l.code.starts_with("PROCEDURE DIVISION"))
        .map(|l| l.number)
}

/// The previous line (before `line`) that carries code.
pub fn previous_code_line(source: &str, line: usize) -> Option<SourceLine> {
    lines(source)
        .into_iter()
        .take(line.saturating_sub(1))
        .filter(|l| !l.code.is_empty())
        .last()
}

/// The code on line `line` (1-based), upper-cased and comment-stripped.
pub fn code_at(source: &str, line: usize) -> Option<String> {
    lines(source).into_iter().nth(line.checked_sub(1)?).map(|l| l.code)
}

/// Scope-terminated statement kinds tracked by [`unbalanced_block_before`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    If,
    Evaluate,
    InlinePerform,
    Search,
}

impl Block {
    fn from_end(word: &str) -> Option<Self> {
        match word {
            "END-IF" => Some(Block::If),
            "END-EVALUATE" => Some(Block::Evaluate),
            "END-PERFORM" => Some(Block::InlinePerform),
            "END-SEARCH" => Some(Block::Search),
            _ => None,
        }
    }
}

fn perform_is_inline(rest: &[String]) -> bool {
    // `PERFORM para`, `PERFORM para UNTIL ..`, `PERFORM para THRU para2` are
    // out-of-line; everything starting with a loop phrase or a statement
    // keyword is inline and needs END-PERFORM.
    match rest.first().map(String::as_str) {
        None => true,
        Some("UNTIL" | "VARYING" | "WITH" | "TEST" | "FOREVER") => true,
        Some(w) if w.chars().all(|c| c.is_ascii_digit()) => {
            // `PERFORM 3 TIMES` is inline.
            rest.get(1).map(String::as_str) == Some("TIMES")
        }
        Some(w) if is_statement_keyword(w) => true,
        Some(_) => {
            // `PERFORM N TIMES` with N a data item.
            rest.get(1).map(String::as_str) == Some("TIMES")
        }
    }
}

fn is_statement_keyword(word: &str) -> bool {
    matches!(
        word,
        "MOVE" | "COMPUTE" | "ADD" | "SUBTRACT" | "MULTIPLY" | "DIVIDE" | "DISPLAY" | "IF"
            | "EVALUATE" | "SET" | "STRING" | "UNSTRING" | "INSPECT" | "CALL" | "INITIALIZE"
            | "ACCEPT" | "SEARCH" | "CONTINUE" | "EXIT" | "GOBACK" | "STOP"
    )
}

/// Reports whether the PROCEDURE DIVISION, scanned up to and including
/// `line`, contains a scope-terminator mismatch:
///
/// * an `END-xxx` with no matching open statement,
/// * a sentence-ending period while an inline `PERFORM` is still open,
/// * a paragraph/section header or end of scan with an inline `PERFORM`,
///   `EVALUATE` or `SEARCH` still open.
///
/// `IF` blocks are legitimately closed by a period, so an open `IF` only
/// counts when an `END-PERFORM`/`END-EVALUATE` arrives while it is on top of
/// the stack, or when it is still open at end of file.
pub fn unbalanced_block_before(source: &str, line: usize) -> bool {
    let all = lines(source);
    let Some(start) = all.iter().position(|l| l.code.starts_with("PROCEDURE DIVISION")) else {
        return false;
    };
    let mut stack: Vec<Block> = Vec::new();
    let last_line = all.len();
    for l in &all[start + 1..] {
        if l.number > line {
            break;
        }
        if l.code.is_empty() {
            continue;
        }
        if is_header_line(&l.code) {
            if stack
                .iter()
                .any(|b| matches!(b, Block::InlinePerform | Block::Evaluate | Block::Search))
            {
                return true;
            }
            stack.clear();
            continue;
        }
        let w = words(&l.code);
        for (i, word) in w.iter().enumerate() {
            match word.as_str() {
                "IF" => stack.push(Block::If),
                "EVALUATE" => stack.push(Block::Evaluate),
                "SEARCH" => stack.push(Block::Search),
                "PERFORM" if perform_is_inline(&w[i + 1..]) => stack.push(Block::InlinePerform),
                end => {
                    if let Some(kind) = Block::from_end(end) {
                        // Implicitly close IFs sitting above the matching opener.
                        loop {
                            match stack.pop() {
                                Some(top) if top == kind => break,
                                Some(Block::If) if kind != Block::If => {
                                    // END-PERFORM closing an open IF.
                                    return true;
                                }
                                Some(_) | None => return true,
                            }
                        }
                    }
                }
            }
        }
        if ends_sentence(&l.code) {
            if stack.iter().any(|b| *b != Block::If) {
                return true;
            }
            stack.clear();
        }
    }
    if line >= last_line && !stack.is_empty() {
        return true;
    }
    false
}

fn ends_sentence(code: &str) -> bool {
    let stripped = without_literals(code);
    stripped.trim_end().ends_with('.')
}

/// True when the statement preceding `line` is not closed by a period and
/// `line` begins a header or data entry that requires one.
pub fn missing_period_before(source: &str, line: usize) -> bool {
    let Some(current) = code_at(source, line) else { return false };
    let needs_period = is_header_line(&current) || is_data_entry(&current);
    if !needs_period {
        return false;
    }
    match previous_code_line(source, line) {
        Some(prev) => !ends_sentence(&prev.code),
        None => false,
    }
}

/// Words on `line` that look like data names declared with a level number.
pub fn declared_names(source: &str) -> Vec<String> {
    lines(source)
        .into_iter()
        .filter(|l| is_data_entry(&l.code))
        .filter_map(|l| words(&l.code).get(1).cloned())
        .collect()
}

/// Returns the lines of the LINKAGE SECTION body (between the header and the
/// PROCEDURE DIVISION), as written.
pub fn linkage_section_body(source: &str) -> Option<Vec<String>> {
    let all = lines(source);
    let start = all.iter().position(|l| l.code.starts_with("LINKAGE SECTION"))?;
    let end = all
        .iter()
        .skip(start)
        .position(|l| l.code.starts_with("PROCEDURE DIVISION"))
        .map(|p| p + start)
        .unwrap_or(all.len());
    Some(
        all[start + 1..end]
            .iter()
            .filter(|l| !l.code.is_empty())
            .map(|l| l.raw.clone())
            .collect(),
    )
}

/// Names listed in `PROCEDURE DIVISION USING a b c.`
pub fn procedure_using(source: &str) -> Vec<String> {
    let all = lines(source);
    let Some(idx) = all.iter().position(|l| l.code.starts_with("PROCEDURE DIVISION")) else {
        return Vec::new();
    };
    let mut text = String::new();
    for l in &all[idx..] {
        text.push(' ');
        text.push_str(&l.code);
        if ends_sentence(&l.code) {
            break;
        }
    }
    let w = words(&text);
    let Some(pos) = w.iter().position(|x| x == "USING") else { return Vec::new() };
    w[pos + 1..]
        .iter()
        .filter(|x| !matches!(x.as_str(), "BY" | "REFERENCE" | "VALUE" | "CONTENT" | "RETURNING"))
        .take_while(|x| x.as_str() != "RETURNING")
        .cloned()
        .collect()
}

/// Value of the `PROGRAM-ID.` paragraph, if present.
pub fn program_id(source: &str) -> Option<String> {
    lines(source).into_iter().find_map(|l| {
        let rest = l.code.strip_prefix("PROGRAM-ID.")?;
        let name = rest.trim().trim_end_matches('.').trim_matches('"').trim_matches('\'');
        name.split_whitespace().next().map(str::to_string)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NESTED: &str = "\
       IDENTIFICATION DIVISION.
       PROGRAM-ID. T.
       PROCEDURE DIVISION.
           PERFORM VARYING I FROM 1 BY 1 UNTIL I > 3
               IF I = 2
                   DISPLAY I
           END-PERFORM
           GOBACK.
";

    #[test]
    fn comments_are_stripped() {
        let l = lines("      * old style\n       MOVE 1 TO X *> trailing\n");
        assert_eq!(l[0].code, "");
        assert_eq!(l[1].code, "MOVE 1 TO X");
    }

    #[test]
    fn comment_marker_inside_literal_is_kept() {
        let l = lines("       DISPLAY \"a *> b\"");
        assert_eq!(l[0].code, "DISPLAY \"A *> B\"");
    }

    #[test]
    fn end_perform_closing_open_if_is_unbalanced() {
        assert!(unbalanced_block_before(NESTED, 7));
        assert!(!unbalanced_block_before(NESTED, 6));
    }

    #[test]
    fn period_closes_if() {
        let src = "PROCEDURE DIVISION.\nIF X = 1\nDISPLAY X.\nGOBACK.\n";
        assert!(!unbalanced_block_before(src, 4));
    }

    #[test]
    fn period_inside_inline_perform_is_unbalanced() {
        let src = "PROCEDURE DIVISION.\nPERFORM UNTIL X > 1\nADD 1 TO X.\nEND-PERFORM.\n";
        assert!(unbalanced_block_before(src, 3));
    }

    #[test]
    fn out_of_line_perform_is_not_a_block() {
        let src = "PROCEDURE DIVISION.\nPERFORM DO-WORK UNTIL X > 1.\nGOBACK.\nDO-WORK.\nADD 1 TO X.\n";
        assert!(!unbalanced_block_before(src, 5));
    }

    #[test]
    fn missing_period_before_paragraph() {
        let src = "PROCEDURE DIVISION.\nMAIN.\nMOVE 1 TO X\nNEXT-PARA.\nGOBACK.\n";
        assert!(missing_period_before(src, 4));
        assert!(!missing_period_before(src, 5));
    }

    #[test]
    fn linkage_and_using() {
        let src = "LINKAGE SECTION.\n01 A PIC 9.\n01 B PIC 9.\nPROCEDURE DIVISION USING A B.\n";
        assert_eq!(linkage_section_body(src).unwrap().len(), 2);
        assert_eq!(procedure_using(src), vec!["A", "B"]);
        assert_eq!(count_section_headers(src, "linkage"), 1);
    }

    #[test]
    fn program_id_is_read() {
        assert_eq!(program_id("       PROGRAM-ID. HAS-CLOSE-ELEMENTS.\n").as_deref(), Some("HAS-CLOSE-ELEMENTS"));
    }
}
