#![allow(dead_code)]

use std::path::PathBuf;

use cobolassist_core::benchmark::{InputBinding, Task, TestCase};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub const TEMPLATE: &str = "       IDENTIFICATION DIVISION.
       PROGRAM-ID. ECHO-N.
       DATA DIVISION.
       LINKAGE SECTION.
       01 L-N PIC 9(3).
       01 RESULT PIC 9(3).
       PROCEDURE DIVISION USING L-N RESULT.
";

pub fn task(id: &str) -> Task {
    Task {
        id: id.into(),
        description: format!("Return the input unchanged ({id})."),
        template_source: TEMPLATE.into(),
        entry_point: "ECHO-N".into(),
        result_name: "RESULT".into(),
        tests: vec![
            TestCase {
                test_id: "t1".into(),
                input_bindings: vec![InputBinding { name: "L-N".into(), value: "7".into(), picture: "9(3)".into() }],
                expected_output: "007".into(),
            },
            TestCase {
                test_id: "t2".into(),
                input_bindings: vec![InputBinding { name: "L-N".into(), value: "42".into(), picture: "9(3)".into() }],
                expected_output: "042".into(),
            },
        ],
    }
}

/// A correct program; `tag` makes otherwise identical programs distinct.
pub fn good_program(tag: &str) -> String {
    format!("{TEMPLATE}      *> {tag}\n           MOVE L-N TO RESULT\n           GOBACK.\n")
}

/// A program the marker-based stub rejects.
pub fn broken_program(tag: &str) -> String {
    format!("{TEMPLATE}      *> {tag}\n           MOVE L-N TO RESULT BROKEN\n           GOBACK.\n")
}

pub fn fenced(source: &str) -> String {
    format!("Here you go:\n\n```cobol\n{source}```\n")
}
