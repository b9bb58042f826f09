use serde::{Deserialize, Serialize};

/// Source pulled out of a model reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extraction {
    pub source: String,
    /// Neither a usable fence nor a division header was found, so the whole
    /// reply was taken as source.
    pub unfenced_fallback: bool,
}

const ACCEPTED_TAGS: [&str; 3] = ["cobol", "cobolfree", ""];

/// Pulls COBOL source out of a reply.
///
/// Fenced blocks tagged `cobol`, `cobolfree` or untagged are concatenated
/// in order. Without such blocks the reply is cut at the first
/// `IDENTIFICATION DIVISION` line and ends before the next fence. In both cases leading comment and
/// directive lines directly above the division header are kept, and in
/// fence mode anything before them is dropped, which makes the function
/// idempotent.
pub fn extract_cobol(response: &str) -> Extraction {
    if let Some(fenced) = fenced_blocks(response) {
        let source = match division_start(&fenced) {
            Some(at) => fenced[at..].to_string(),
            None => fenced,
        };
        return Extraction { source, unfenced_fallback: false };
    }
    match division_start(response) {
        Some(at) => {
            // A later fence (say, a usage example in another language) ends
            // the program.
            let rest = &response[at..];
            let end = fence_offset(rest).unwrap_or(rest.len());
            Extraction { source: rest[..end].to_string(), unfenced_fallback: false }
        }
        None => Extraction { source: response.to_string(), unfenced_fallback: true },
    }
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

/// Byte offset of the first fence line in `text`.
fn fence_offset(text: &str) -> Option<usize> {
    let mut offset = 0;
    for line in text.split('\n') {
        if is_fence(line) {
            return Some(offset);
        }
        offset += line.len() + 1;
    }
    None
}

/// `None` when the reply has no block with an accepted tag.
fn fenced_blocks(response: &str) -> Option<String> {
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Option<(bool, Vec<&str>)> = None;
    for line in response.split('\n') {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if is_fence(line) {
            match current.take() {
                Some((keep, body)) => {
                    if keep {
                        blocks.push(body);
                    }
                }
                None => {
                    let info = line.trim_start().trim_start_matches('`').trim();
                    let tag = info.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
                    current = Some((ACCEPTED_TAGS.contains(&tag.as_str()), Vec::new()));
                }
            }
        } else if let Some((_, body)) = current.as_mut() {
            body.push(line);
        }
    }
    // An unclosed fence runs to the end of the reply.
    if let Some((true, body)) = current {
        blocks.push(body);
    }
    if blocks.is_empty() {
        return None;
    }
    Some(blocks.iter().map(|b| b.join("\n")).collect::<Vec<_>>().join("\n"))
}

fn is_division_header(line: &str) -> bool {
    let upper = line.trim_start().to_ascii_uppercase();
    upper.starts_with("IDENTIFICATION DIVISION") || upper.starts_with("ID DIVISION")
}

fn is_comment_or_directive(line: &str) -> bool {
    let t = line.trim_start();
    if t.starts_with("*>") || t.starts_with(">>") {
        return true;
    }
    // Fixed-format indicator area.
    let bytes = line.as_bytes();
    bytes.len() > 6 && (bytes[6] == b'*' || bytes[6] == b'/') && bytes[..6].iter().all(|b| b.is_ascii_digit() || *b == b' ')
}

/// Byte offset where the program starts, if a division header exists.
fn division_start(text: &str) -> Option<usize> {
    let mut starts = Vec::new();
    let mut offset = 0;
    for line in text.split('\n') {
        starts.push((offset, line.strip_suffix('\r').unwrap_or(line)));
        offset += line.len() + 1;
    }
    let header = starts.iter().position(|(_, l)| is_division_header(l))?;
    let mut first = header;
    while first > 0 && is_comment_or_directive(starts[first - 1].1) {
        first -= 1;
    }
    Some(starts[first].0)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROG: &str = "IDENTIFICATION DIVISION.\nPROGRAM-ID. P.\nPROCEDURE DIVISION.\n    STOP RUN.";

    #[test]
    fn strips_single_fence() {
        let e = extract_cobol(&format!("Here is the fix:\n```cobol\n{PROG}\n```"));
        assert_eq!(e.source, PROG);
        assert!(!e.unfenced_fallback);
    }

    #[test]
    fn raw_program_is_unchanged() {
        assert_eq!(extract_cobol(PROG).source, PROG);
        let indented = format!("       {PROG}");
        assert_eq!(extract_cobol(&indented).source, indented);
    }

    #[test]
    fn other_languages_are_skipped() {
        let e = extract_cobol(&format!("```python\nprint(1)\n```\n```COBOL\n{PROG}\n```"));
        assert_eq!(e.source, PROG);
    }

    #[test]
    fn prose_before_division_is_cut() {
        let e = extract_cobol(&format!("Sure.\n*> header\n{PROG}"));
        assert_eq!(e.source, format!("*> header\n{PROG}"));
    }

    #[test]
    fn unclosed_fence_runs_to_end() {
        assert_eq!(extract_cobol(&format!("```cobol\n{PROG}")).source, PROG);
    }

    #[test]
    fn fallback_is_flagged() {
        let e = extract_cobol("I cannot help with that.");
        assert_eq!(e.source, "I cannot help with that.");
        assert!(e.unfenced_fallback);
    }
}
