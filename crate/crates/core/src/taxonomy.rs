//! Compilation-error taxonomy.
//!
//! Eight categories in three groups plus `Other`. Classification runs an
//! ordered rule table (`data/taxonomy_rules.json` by default): each rule is
//! a message regex with an optional named source-context predicate, and the
//! first rule that matches decides the label. No match means `Other`.
//!
//! The default table lists rules in this precedence:
//! UndefinedObject, IncorrectDataType, IncorrectReservedWord,
//! IncorrectBuiltinFunction, IncompleteBlockTermination,
//! UnterminatedStatement, IncorrectProgramStructure, IncorrectVariableUse.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compiler::Diagnostic;
use crate::source;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    IncompleteBlockTermination,
    UnterminatedStatement,
    IncorrectProgramStructure,
    IncorrectReservedWord,
    IncorrectBuiltinFunction,
    UndefinedObject,
    IncorrectVariableUse,
    IncorrectDataType,
    Other,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 9] = [
        ErrorCategory::IncompleteBlockTermination,
        ErrorCategory::UnterminatedStatement,
        ErrorCategory::IncorrectProgramStructure,
        ErrorCategory::IncorrectReservedWord,
        ErrorCategory::IncorrectBuiltinFunction,
        ErrorCategory::UndefinedObject,
        ErrorCategory::IncorrectVariableUse,
        ErrorCategory::IncorrectDataType,
        ErrorCategory::Other,
    ];

    /// Rule precedence of the default table, most specific first.
    pub const PRECEDENCE: [ErrorCategory; 9] = [
        ErrorCategory::UndefinedObject,
        ErrorCategory::IncorrectDataType,
        ErrorCategory::IncorrectReservedWord,
        ErrorCategory::IncorrectBuiltinFunction,
        ErrorCategory::IncompleteBlockTermination,
        ErrorCategory::UnterminatedStatement,
        ErrorCategory::IncorrectProgramStructure,
        ErrorCategory::IncorrectVariableUse,
        ErrorCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::IncompleteBlockTermination => "IncompleteBlockTermination",
            ErrorCategory::UnterminatedStatement => "UnterminatedStatement",
            ErrorCategory::IncorrectProgramStructure => "IncorrectProgramStructure",
            ErrorCategory::IncorrectReservedWord => "IncorrectReservedWord",
            ErrorCategory::IncorrectBuiltinFunction => "IncorrectBuiltinFunction",
            ErrorCategory::UndefinedObject => "UndefinedObject",
            ErrorCategory::IncorrectVariableUse => "IncorrectVariableUse",
            ErrorCategory::IncorrectDataType => "IncorrectDataType",
            ErrorCategory::Other => "Other",
        }
    }

    pub fn group(self) -> CategoryGroup {
        group_of(self)
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown error category {0:?}")]
pub struct UnknownCategory(pub String);

impl FromStr for ErrorCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CategoryGroup {
    IncompleteCode,
    Syntax,
    TypeRelated,
    Other,
}

impl fmt::Display for CategoryGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CategoryGroup::IncompleteCode => "IncompleteCode",
            CategoryGroup::Syntax => "Syntax",
            CategoryGroup::TypeRelated => "TypeRelated",
            CategoryGroup::Other => "Other",
        })
    }
}

pub fn group_of(category: ErrorCategory) -> CategoryGroup {
    use ErrorCategory::*;
    match category {
        IncompleteBlockTermination | UnterminatedStatement => CategoryGroup::IncompleteCode,
        IncorrectProgramStructure | IncorrectReservedWord | IncorrectBuiltinFunction | UndefinedObject
        | IncorrectVariableUse => CategoryGroup::Syntax,
        IncorrectDataType => CategoryGroup::TypeRelated,
        Other => CategoryGroup::Other,
    }
}

/// Named source-context checks a rule can require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextPredicate {
    /// A division or section header appears more than once.
    DuplicateSectionHeader,
    /// Scope terminators are mismatched up to the diagnostic line.
    UnbalancedBlock,
    /// The statement before a header or data entry on the diagnostic line
    /// has no closing period.
    MissingPeriod,
    /// An intrinsic function name is used without `FUNCTION`, or a foreign
    /// operator such as `%` appears, on or just before the diagnostic line.
    IntrinsicWithoutFunction,
    /// The token named in `unexpected <TOKEN>` is a reserved word that the
    /// program declares as a data item or paragraph.
    ReservedWordAsName,
}

impl ContextPredicate {
    pub fn holds(self, diagnostic: &Diagnostic, source: &str) -> bool {
        let line = diagnostic.line as usize;
        match self {
            ContextPredicate::DuplicateSectionHeader => source::has_duplicate_header(source),
            ContextPredicate::UnbalancedBlock => line > 0 && source::unbalanced_block_before(source, line),
            ContextPredicate::MissingPeriod => line > 0 && source::missing_period_before(source, line),
            ContextPredicate::IntrinsicWithoutFunction => line > 0 && intrinsic_misuse_near(source, line),
            ContextPredicate::ReservedWordAsName => reserved_word_as_name(&diagnostic.message, source),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleSpec {
    pub label: ErrorCategory,
    pub pattern: String,
    #[serde(default)]
    pub context: Option<ContextPredicate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleTable {
    pub rules: Vec<RuleSpec>,
}

#[derive(Debug, Error)]
pub enum RuleTableError {
    #[error("cannot parse rule table: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("rule {index} has an invalid pattern: {source}")]
    Pattern {
        index: usize,
        #[source]
        source: regex::Error,
    },
}

#[derive(Debug, Clone)]
struct Rule {
    label: ErrorCategory,
    pattern: Regex,
    context: Option<ContextPredicate>,
}

/// Ordered first-match classifier.
#[derive(Debug, Clone)]
pub struct Classifier {
    rules: Vec<Rule>,
}

pub const DEFAULT_RULES: &str = include_str!("../data/taxonomy_rules.json");

impl Classifier {
    pub fn from_table(table: &RuleTable) -> Result<Self, RuleTableError> {
        let rules = table
            .rules
            .iter()
            .enumerate()
            .map(|(index, r)| {
                Ok(Rule {
                    label: r.label,
                    pattern: Regex::new(&r.pattern).map_err(|source| RuleTableError::Pattern { index, source })?,
                    context: r.context,
                })
            })
            .collect::<Result<_, RuleTableError>>()?;
        Ok(Classifier { rules })
    }

    pub fn from_json(text: &str) -> Result<Self, RuleTableError> {
        Self::from_table(&serde_json::from_str(text)?)
    }

    /// Index of the first matching rule, if any.
    pub fn matching_rule(&self, diagnostic: &Diagnostic, source: &str) -> Option<usize> {
        self.rules.iter().position(|r| {
            r.pattern.is_match(&diagnostic.message) && r.context.is_none_or(|p| p.holds(diagnostic, source))
        })
    }

    pub fn classify(&self, diagnostic: &Diagnostic, source: &str) -> ErrorCategory {
        self.matching_rule(diagnostic, source)
            .map(|i| self.rules[i].label)
            .unwrap_or(ErrorCategory::Other)
    }

    /// Labels in rule order.
    pub fn labels(&self) -> Vec<ErrorCategory> {
        self.rules.iter().map(|r| r.label).collect()
    }
}

impl Default for Classifier {
    fn default() -> Self {
        default_classifier().clone()
    }
}

fn default_classifier() -> &'static Classifier {
    static DEFAULT: OnceLock<Classifier> = OnceLock::new();
    DEFAULT.get_or_init(|| Classifier::from_json(DEFAULT_RULES).expect("bundled rule table is valid"))
}

/// Classifies one diagnostic with the bundled rule table.
pub fn classify(diagnostic: &Diagnostic, source: &str) -> ErrorCategory {
    default_classifier().classify(diagnostic, source)
}

const INTRINSICS: &[&str] = &[
    "ABS", "ACOS", "ANNUITY", "ASIN", "ATAN", "BYTE-LENGTH", "CHAR", "CONCATENATE", "COS",
    "CURRENT-DATE", "DATE-OF-INTEGER", "EXP", "FACTORIAL", "INTEGER", "INTEGER-PART", "LENGTH",
    "LOG", "LOG10", "LOWER-CASE", "MAX", "MEAN", "MEDIAN", "MIN", "MOD", "NUMVAL", "NUMVAL-C",
    "ORD", "ORD-MAX", "ORD-MIN", "RANDOM", "RANGE", "REM", "REVERSE", "SIGN", "SIN", "SQRT",
    "SUBSTITUTE", "SUM", "TAN", "TRIM", "UPPER-CASE", "VARIANCE",
];

const RESERVED: &[&str] = &[
    "ACCEPT", "ACCESS", "ADD", "ADDRESS", "ADVANCING", "AFTER", "ALL", "ALPHABET", "ALPHABETIC",
    "ALSO", "ALTER", "AND", "ANY", "ARE", "AREA", "AS", "ASCENDING", "ASSIGN", "AT", "BEFORE",
    "BINARY", "BLANK", "BLOCK", "BOTTOM", "BY", "CALL", "CANCEL", "CHARACTER", "CHARACTERS",
    "CLASS", "CLOSE", "CODE", "COLUMN", "COMMA", "COMP", "COMPUTE", "CONSTANT", "CONTAINS",
    "CONTENT", "CONTINUE", "CONTROL", "CONVERTING", "COPY", "COUNT", "CURRENCY", "DATA", "DATE",
    "DAY", "DELETE", "DELIMITED", "DELIMITER", "DEPENDING", "DESCENDING", "DISPLAY", "DIVIDE",
    "DIVISION", "DOWN", "DUPLICATES", "DYNAMIC", "ELSE", "END", "ENTRY", "EQUAL", "ERROR",
    "EVALUATE", "EXCEPTION", "EXIT", "EXTEND", "EXTERNAL", "FALSE", "FILE", "FILLER", "FINAL",
    "FIRST", "FOR", "FREE", "FROM", "FUNCTION", "GENERATE", "GIVING", "GLOBAL", "GO", "GOBACK",
    "GREATER", "GROUP", "HEADING", "HIGH-VALUE", "IF", "IN", "INDEX", "INDEXED", "INITIAL",
    "INITIALIZE", "INPUT", "INSPECT", "INTO", "INVALID", "IS", "JUST", "JUSTIFIED", "KEY",
    "LABEL", "LAST", "LEADING", "LEFT", "LENGTH", "LESS", "LIMIT", "LIMITS", "LINE", "LINES",
    "LINKAGE", "LOCK", "LOW-VALUE", "MEMORY", "MERGE", "MESSAGE", "MODE", "MOVE", "MULTIPLY",
    "NEGATIVE", "NEXT", "NO", "NOT", "NULL", "NUMBER", "NUMERIC", "OCCURS", "OF", "OFF", "OMITTED",
    "ON", "OPEN", "OPTIONAL", "OR", "ORDER", "OTHER", "OUTPUT", "OVERFLOW", "PAGE", "PERFORM",
    "POINTER", "POSITION", "POSITIVE", "PROCEDURE", "PROGRAM", "QUOTE", "RANDOM", "READ", "RECORD",
    "RECORDS", "REDEFINES", "REFERENCE", "RELATIVE", "RELEASE", "REMAINDER", "REMOVAL", "RENAMES",
    "REPLACE", "REPLACING", "REPORT", "RESERVE", "RESET", "RETURN", "REWRITE", "RIGHT", "ROUNDED",
    "RUN", "SEARCH", "SECTION", "SECURITY", "SELECT", "SENTENCE", "SEPARATE", "SEQUENCE", "SET",
    "SIGN", "SIZE", "SORT", "SOURCE", "SPACE", "SPACES", "STANDARD", "START", "STATUS", "STOP",
    "STRING", "SUBTRACT", "SUM", "SUPPRESS", "SYMBOLIC", "TABLE", "TALLYING", "TERMINATE", "TEST",
    "THAN", "THEN", "THROUGH", "THRU", "TIME", "TIMES", "TO", "TOP", "TRAILING", "TRUE", "TYPE",
    "UNIT", "UNSTRING", "UNTIL", "UP", "UPON", "USAGE", "USE", "USING", "VALUE", "VALUES",
    "VARYING", "WHEN", "WITH", "WORDS", "WRITE", "ZERO", "ZEROS", "ZEROES",
];

pub fn is_reserved_word(word: &str) -> bool {
    RESERVED.contains(&word.to_ascii_uppercase().as_str())
}

fn intrinsic_misuse_near(source: &str, line: usize) -> bool {
    let declared = source::declared_names(source);
    let mut candidates = Vec::new();
    if let Some(code) = source::code_at(source, line) {
        candidates.push(code);
    }
    if let Some(prev) = source::previous_code_line(source, line) {
        // Multi-line statements are often reported on their continuation.
        if !prev.code.trim_end().ends_with('.') {
            candidates.push(prev.code);
        }
    }
    candidates.iter().any(|code| {
        let bare = source::without_literals(code);
        if bare.contains('%') {
            return true;
        }
        let words = source::words(code);
        words.iter().enumerate().any(|(i, w)| {
            // The statement verb itself is never an intrinsic; `LENGTH OF x`
            // is valid syntax.
            i > 0
                && INTRINSICS.contains(&w.as_str())
                && words[i - 1] != "FUNCTION"
                && !declared.contains(w)
                && words.get(i + 1).map(String::as_str) != Some("OF")
        })
    })
}

fn reserved_word_as_name(message: &str, source: &str) -> bool {
    static TOKEN: OnceLock<Regex> = OnceLock::new();
    let re = TOKEN.get_or_init(|| Regex::new(r"unexpected ([A-Za-z0-9-]+)").unwrap());
    let Some(token) = re.captures(message).map(|c| c[1].to_ascii_uppercase()) else {
        return false;
    };
    if !is_reserved_word(&token) {
        return false;
    }
    source::lines(source).iter().any(|l| {
        let w = source::words(&l.code);
        let declared = source::is_data_entry(&l.code) && w.get(1) == Some(&token);
        let paragraph = l.code == format!("{token}.");
        declared || paragraph
    })
}

/// Counts and fractions per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub total: u64,
    pub counts: BTreeMap<ErrorCategory, u64>,
    /// Empty when `total` is zero.
    pub percentages: BTreeMap<ErrorCategory, f64>,
    /// Set when there was nothing to count.
    pub empty: bool,
}

impl Distribution {
    pub fn count(&self, c: ErrorCategory) -> u64 {
        self.counts.get(&c).copied().unwrap_or(0)
    }

    pub fn fraction(&self, c: ErrorCategory) -> Option<f64> {
        self.percentages.get(&c).copied()
    }
}

pub fn distribution(categories: &[ErrorCategory]) -> Distribution {
    let mut counts: BTreeMap<ErrorCategory, u64> = ErrorCategory::ALL.iter().map(|c| (*c, 0)).collect();
    for c in categories {
        *counts.get_mut(c).expect("all categories present") += 1;
    }
    let total = categories.len() as u64;
    let percentages = if total == 0 {
        BTreeMap::new()
    } else {
        counts.iter().map(|(c, n)| (*c, *n as f64 / total as f64)).collect()
    };
    Distribution { total, counts, percentages, empty: total == 0 }
}

/// Published category shares of compile errors in LLM-generated programs
/// before repair. Categories not listed were not reported individually.
pub const LLM_BEFORE_REFERENCE: &[(ErrorCategory, f64)] = &[
    (ErrorCategory::IncorrectProgramStructure, 0.351),
    (ErrorCategory::IncorrectBuiltinFunction, 0.172),
    (ErrorCategory::IncorrectDataType, 0.122),
    (ErrorCategory::UndefinedObject, 0.114),
    (ErrorCategory::IncompleteBlockTermination, 0.056),
    (ErrorCategory::Other, 0.010),
];

/// Published shares after compiler-feedback repair (partial).
pub const LLM_AFTER_REFERENCE: &[(ErrorCategory, f64)] = &[
    (ErrorCategory::IncorrectDataType, 0.038),
    (ErrorCategory::UndefinedObject, 0.031),
];

/// Published shares for human-written programs, remapped onto this
/// taxonomy (partial).
pub const HUMAN_REFERENCE: &[(ErrorCategory, f64)] = &[
    (ErrorCategory::IncorrectProgramStructure, 0.198),
    (ErrorCategory::Other, 0.316),
    (ErrorCategory::IncorrectBuiltinFunction, 0.0),
    (ErrorCategory::IncompleteBlockTermination, 0.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryComparison {
    pub category: ErrorCategory,
    pub observed: Option<f64>,
    pub reference: f64,
}

/// Lines up an observed distribution against reference shares.
pub fn compare_to_reference(observed: &Distribution, reference: &[(ErrorCategory, f64)]) -> Vec<CategoryComparison> {
    reference
        .iter()
        .map(|(c, r)| CategoryComparison { category: *c, observed: observed.fraction(*c), reference: *r })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::Severity;

    fn diag(line: u32, message: &str) -> Diagnostic {
        Diagnostic {
            path: "prog.cob".into(),
            line,
            column: None,
            severity: Severity::Error,
            message: message.into(),
            external: false,
        }
    }

    #[test]
    fn groups_are_fixed() {
        assert_eq!(group_of(ErrorCategory::IncorrectDataType), CategoryGroup::TypeRelated);
        assert_eq!(group_of(ErrorCategory::IncompleteBlockTermination), CategoryGroup::IncompleteCode);
        assert_eq!(group_of(ErrorCategory::UnterminatedStatement), CategoryGroup::IncompleteCode);
        assert_eq!(group_of(ErrorCategory::Other), CategoryGroup::Other);
        for c in [
            ErrorCategory::IncorrectProgramStructure,
            ErrorCategory::IncorrectReservedWord,
            ErrorCategory::IncorrectBuiltinFunction,
            ErrorCategory::UndefinedObject,
            ErrorCategory::IncorrectVariableUse,
        ] {
            assert_eq!(group_of(c), CategoryGroup::Syntax);
        }
    }

    #[test]
    fn undefined_name() {
        assert_eq!(classify(&diag(9, "'WS-TOTAL' is not defined"), ""), ErrorCategory::UndefinedObject);
    }

    #[test]
    fn unmatched_message_is_other() {
        assert_eq!(classify(&diag(1, "invalid symbol '$' - skipping word"), ""), ErrorCategory::Other);
    }

    #[test]
    fn default_table_respects_precedence() {
        let labels = Classifier::default().labels();
        let rank = |c: &ErrorCategory| ErrorCategory::PRECEDENCE.iter().position(|p| p == c).unwrap();
        assert!(labels.windows(2).all(|w| rank(&w[0]) <= rank(&w[1])), "{labels:?}");
    }

    #[test]
    fn first_match_wins() {
        // Message matches both the undefined-name and the variable-use rule.
        let d = diag(3, "'X' is not defined; duplicate definition");
        let c = Classifier::default();
        assert_eq!(c.classify(&d, ""), ErrorCategory::UndefinedObject);

        let swapped = Classifier::from_json(
            r#"{"rules":[
                {"label":"IncorrectVariableUse","pattern":"duplicate"},
                {"label":"UndefinedObject","pattern":"is not defined"}]}"#,
        )
        .unwrap();
        assert_eq!(swapped.classify(&d, ""), ErrorCategory::IncorrectVariableUse);
    }

    #[test]
    fn reserved_word_requires_declaration() {
        let src = "DATA DIVISION.\nWORKING-STORAGE SECTION.\n01 COUNT PIC 9(3).\n";
        let d = diag(3, "syntax error, unexpected COUNT");
        assert_eq!(classify(&d, src), ErrorCategory::IncorrectReservedWord);
        assert_ne!(classify(&d, "01 WS-COUNT PIC 9.\n"), ErrorCategory::IncorrectReservedWord);
    }

    #[test]
    fn inline_mod_is_builtin_misuse() {
        let src = "PROCEDURE DIVISION.\n    COMPUTE R = N MOD 2\n    GOBACK.\n";
        assert_eq!(
            classify(&diag(2, "syntax error, unexpected Identifier"), src),
            ErrorCategory::IncorrectBuiltinFunction
        );
        let ok = "PROCEDURE DIVISION.\n    COMPUTE R = FUNCTION MOD(N 2)\n    GOBACK.\n";
        assert_ne!(
            classify(&diag(2, "syntax error, unexpected Identifier"), ok),
            ErrorCategory::IncorrectBuiltinFunction
        );
    }

    #[test]
    fn category_names_round_trip() {
        for c in ErrorCategory::ALL {
            assert_eq!(c.as_str().parse::<ErrorCategory>().unwrap(), c);
        }
        assert!("Bogus".parse::<ErrorCategory>().is_err());
    }

    #[test]
    fn empty_distribution_is_flagged() {
        let d = distribution(&[]);
        assert!(d.empty);
        assert_eq!(d.total, 0);
        assert!(d.percentages.is_empty());
        assert_eq!(d.counts.len(), 9);
        assert!(d.counts.values().all(|n| *n == 0));
    }

    #[test]
    fn single_label_is_whole_distribution() {
        let d = distribution(&[ErrorCategory::UndefinedObject]);
        assert_eq!(d.fraction(ErrorCategory::UndefinedObject), Some(1.0));
        assert_eq!(d.fraction(ErrorCategory::Other), Some(0.0));
    }
}
