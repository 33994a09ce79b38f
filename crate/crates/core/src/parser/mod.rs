//! Stack-based parser, validator and canonical serializer for the PlantUML
//! subset that carries activity and class diagrams.

mod activity;
mod class;
mod serialize;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use activity::parse_activity;
pub use class::parse_class;
pub use serialize::{serialize_activity, serialize_class};

/// How unrecognized statements are treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    /// Unknown statements are errors. Meant for linting reference corpora.
    Strict,
    /// Unknown statements are skipped and reported as warnings. Used for
    /// model outputs, which routinely carry decorative PlantUML.
    #[default]
    Lenient,
}

impl std::str::FromStr for ParseMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(ParseMode::Strict),
            "lenient" => Ok(ParseMode::Lenient),
            other => Err(format!(
                "unknown parse mode `{other}` (expected strict|lenient)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    MissingStartMarker,
    MissingEndMarker,
    UnbalancedBlock,
    UnknownStatement,
    EmptyDocument,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::MissingStartMarker => "missing_start_marker",
            ParseErrorKind::MissingEndMarker => "missing_end_marker",
            ParseErrorKind::UnbalancedBlock => "unbalanced_block",
            ParseErrorKind::UnknownStatement => "unknown_statement",
            ParseErrorKind::EmptyDocument => "empty_document",
        }
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind} at line {line}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// 1-based line in the original source.
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, line: usize, message: impl Into<String>) -> Self {
        ParseError {
            kind,
            line,
            message: message.into(),
        }
    }
}

/// A statement the lenient parser skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// Result of a successful parse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parsed<T> {
    pub diagram: T,
    pub warnings: Vec<ParseWarning>,
    /// Scope frames opened and closed. Equal on every accepted document.
    pub scope_pushes: usize,
    pub scope_pops: usize,
}

fn is_marker(line: &str, marker: &str) -> bool {
    line.trim_start()
        .get(..marker.len())
        .is_some_and(|head| head.eq_ignore_ascii_case(marker))
}

/// True iff some line starting with `@startuml` is followed by a line starting
/// with `@enduml`. Leading whitespace on either line is allowed.
pub fn check_markers(src: &str) -> bool {
    let mut lines = src.lines();
    lines.by_ref().any(|l| is_marker(l, "@startuml")) && lines.any(|l| is_marker(l, "@enduml"))
}

/// Lines strictly between the first `@startuml` and the next `@enduml`, each
/// paired with its 1-based line number, plus the line number of `@enduml`.
/// Numbered body lines and the line number of `@enduml`.
pub(crate) type Body<'a> = (Vec<(usize, &'a str)>, usize);

pub(crate) fn body_lines(src: &str) -> Result<Body<'_>, ParseError> {
    let mut numbered = src.lines().enumerate().map(|(i, l)| (i + 1, l));
    let start = numbered.by_ref().find(|(_, l)| is_marker(l, "@startuml"));
    if start.is_none() {
        return Err(ParseError::new(
            ParseErrorKind::MissingStartMarker,
            1,
            "no line begins with @startuml",
        ));
    }
    let mut body = Vec::new();
    for (number, line) in numbered {
        if is_marker(line, "@enduml") {
            return Ok((body, number));
        }
        body.push((number, line));
    }
    let last = src.lines().count().max(1);
    Err(ParseError::new(
        ParseErrorKind::MissingEndMarker,
        last,
        "@startuml is never closed by @enduml",
    ))
}

/// Collapses every whitespace run (line breaks included) to one space and
/// trims the ends.
pub(crate) fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// If `line` starts with `keyword` (ASCII case-insensitive) followed by end of
/// line, whitespace, or one of `({"`, returns the remainder.
pub(crate) fn keyword<'a>(line: &'a str, kw: &str) -> Option<&'a str> {
    let head = line.get(..kw.len())?;
    if !head.eq_ignore_ascii_case(kw) {
        return None;
    }
    let rest = &line[kw.len()..];
    match rest.chars().next() {
        None => Some(rest),
        Some(c) if c.is_whitespace() || matches!(c, '(' | '{' | '"') => Some(rest),
        Some(_) => None,
    }
}

/// Splits `(content) rest` at the matching close parenthesis. Without a
/// leading `(` the whole input is the content. An unmatched `(` consumes the
/// rest of the line.
pub(crate) fn paren_group(s: &str) -> (String, &str) {
    let s = s.trim_start();
    let Some(inner) = s.strip_prefix('(') else {
        return (normalize_text(s), "");
    };
    let mut depth = 1usize;
    for (idx, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return (normalize_text(&inner[..idx]), &inner[idx + 1..]);
                }
            }
            _ => {}
        }
    }
    (normalize_text(inner), "")
}

/// Line-level filter for statements both diagram kinds ignore: comments,
/// notes, legends, styling and titles.
#[derive(Debug, Default)]
pub(crate) struct Decorations {
    block: Option<Block>,
}

#[derive(Debug)]
enum Block {
    Comment,
    Note,
    Legend,
    Skinparam(usize),
}

impl Decorations {
    /// Returns true when the line was consumed as decoration.
    pub(crate) fn consume(&mut self, trimmed: &str) -> bool {
        if let Some(block) = &mut self.block {
            let lower = trimmed.to_ascii_lowercase();
            let done = match block {
                Block::Comment => trimmed.contains("'/"),
                Block::Note => lower.starts_with("end note") || lower.starts_with("endnote"),
                Block::Legend => lower.starts_with("endlegend") || lower.starts_with("end legend"),
                Block::Skinparam(depth) => {
                    *depth += trimmed.matches('{').count();
                    *depth = depth.saturating_sub(trimmed.matches('}').count());
                    *depth == 0
                }
            };
            if done {
                self.block = None;
            }
            return true;
        }
        if let Some(rest) = trimmed.strip_prefix("/'") {
            if !rest.contains("'/") {
                self.block = Some(Block::Comment);
            }
            return true;
        }
        if trimmed.starts_with('\'') {
            return true;
        }
        let note_rest = keyword(trimmed, "note")
            .or_else(|| keyword(trimmed, "floating").and_then(|r| keyword(r.trim_start(), "note")));
        if let Some(rest) = note_rest {
            if !rest.contains(':') {
                self.block = Some(Block::Note);
            }
            return true;
        }
        if keyword(trimmed, "legend").is_some() {
            self.block = Some(Block::Legend);
            return true;
        }
        if let Some(rest) = keyword(trimmed, "skinparam") {
            let depth = rest
                .matches('{')
                .count()
                .saturating_sub(rest.matches('}').count());
            if depth > 0 {
                self.block = Some(Block::Skinparam(depth));
            }
            return true;
        }
        const IGNORED: [&str; 9] = [
            "title", "header", "footer", "caption", "scale", "hide", "show", "!theme", "skin",
        ];
        if IGNORED.iter().any(|kw| keyword(trimmed, kw).is_some()) {
            return true;
        }
        let lower = trimmed.to_ascii_lowercase();
        lower == "left to right direction" || lower == "top to bottom direction"
    }
}

/// Shared bookkeeping for unknown statements and warnings.
#[derive(Debug)]
pub(crate) struct Diagnostics {
    mode: ParseMode,
    pub(crate) warnings: Vec<ParseWarning>,
}

impl Diagnostics {
    pub(crate) fn new(mode: ParseMode) -> Self {
        Diagnostics {
            mode,
            warnings: Vec::new(),
        }
    }

    /// Error in strict mode, warning in lenient mode.
    pub(crate) fn unknown(&mut self, line: usize, message: String) -> Result<(), ParseError> {
        match self.mode {
            ParseMode::Strict => Err(ParseError::new(
                ParseErrorKind::UnknownStatement,
                line,
                message,
            )),
            ParseMode::Lenient => {
                self.warnings.push(ParseWarning { line, message });
                Ok(())
            }
        }
    }

    pub(crate) fn warn(&mut self, line: usize, message: String) {
        self.warnings.push(ParseWarning { line, message });
    }
}
