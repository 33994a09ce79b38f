use super::{
    body_lines, keyword, normalize_text, paren_group, Decorations, Diagnostics, ParseError,
    ParseErrorKind, ParseMode, Parsed,
};
use crate::diagram::{ActionNode, ActivityDiagram, FlowElement, LoopKind, Partition};

enum Frame {
    Partition {
        raw_name: String,
        body: Vec<FlowElement>,
        line: usize,
    },
    If {
        condition: String,
        then_body: Vec<FlowElement>,
        else_body: Vec<FlowElement>,
        in_else: bool,
        /// Opened by `elseif`; closed together with its parent by `endif`.
        implicit: bool,
        line: usize,
    },
    While {
        condition: String,
        body: Vec<FlowElement>,
        line: usize,
    },
    Repeat {
        body: Vec<FlowElement>,
        line: usize,
    },
}

impl Frame {
    fn line(&self) -> usize {
        match self {
            Frame::Partition { line, .. }
            | Frame::If { line, .. }
            | Frame::While { line, .. }
            | Frame::Repeat { line, .. } => *line,
        }
    }

    fn describe(&self) -> &'static str {
        match self {
            Frame::Partition { .. } => "partition",
            Frame::If { .. } => "if",
            Frame::While { .. } => "while",
            Frame::Repeat { .. } => "repeat",
        }
    }
}

struct PendingAction {
    line: usize,
    pieces: Vec<String>,
}

struct ActivityParser {
    diagram: ActivityDiagram,
    stack: Vec<Frame>,
    diagnostics: Diagnostics,
    decorations: Decorations,
    pending: Option<PendingAction>,
    expect_brace: bool,
    statements: usize,
    pushes: usize,
    pops: usize,
}

/// Parses an activity diagram.
///
/// Accepted statements: `start`, `stop`, `end`, `:text;` (possibly spanning
/// lines), `partition NAME {` / `}`, `if (c) then` / `elseif` / `else` /
/// `endif`, `while (c)` / `endwhile`, `repeat` / `repeat while (c)`. Notes,
/// comments, skinparams and titles are ignored. Keywords are matched without
/// regard to case.
pub fn parse_activity(src: &str, mode: ParseMode) -> Result<Parsed<ActivityDiagram>, ParseError> {
    let (lines, end_line) = body_lines(src)?;
    let mut parser = ActivityParser {
        diagram: ActivityDiagram::default(),
        stack: Vec::new(),
        diagnostics: Diagnostics::new(mode),
        decorations: Decorations::default(),
        pending: None,
        expect_brace: false,
        statements: 0,
        pushes: 0,
        pops: 0,
    };
    for (number, line) in lines {
        parser.line(number, line)?;
    }
    parser.finish(end_line)
}

impl ActivityParser {
    fn line(&mut self, number: usize, raw: &str) -> Result<(), ParseError> {
        let trimmed = raw.trim();

        if let Some(pending) = &mut self.pending {
            if let Some(last) = trimmed.strip_suffix(';') {
                pending.pieces.push(last.to_string());
                let pending = self.pending.take().expect("pending action");
                self.finish_action(pending)?;
            } else {
                pending.pieces.push(trimmed.to_string());
            }
            return Ok(());
        }

        if trimmed.is_empty() || self.decorations.consume(trimmed) {
            return Ok(());
        }

        if std::mem::take(&mut self.expect_brace) && trimmed == "{" {
            return Ok(());
        }

        if let Some(rest) = trimmed.strip_prefix(':') {
            self.statements += 1;
            let pending = PendingAction {
                line: number,
                pieces: vec![],
            };
            match rest.strip_suffix(';') {
                Some(text) => self.finish_action(PendingAction {
                    pieces: vec![text.to_string()],
                    ..pending
                })?,
                None => {
                    self.pending = Some(PendingAction {
                        pieces: vec![rest.to_string()],
                        ..pending
                    })
                }
            }
            return Ok(());
        }

        let lower = trimmed.to_ascii_lowercase();
        match lower.as_str() {
            "start" => {
                self.statements += 1;
                self.diagram.has_start = true;
                return Ok(());
            }
            "stop" | "end" => {
                self.statements += 1;
                self.diagram.has_stop = true;
                return Ok(());
            }
            "}" => {
                self.statements += 1;
                return self.close_partition(number);
            }
            _ => {}
        }

        if let Some(rest) = keyword(trimmed, "partition") {
            self.statements += 1;
            return self.open_partition(number, rest);
        }
        if let Some(rest) = keyword(trimmed, "elseif")
            .or_else(|| keyword(trimmed, "else").and_then(|r| keyword(r.trim_start(), "if")))
        {
            self.statements += 1;
            return self.open_elseif(number, rest);
        }
        if keyword(trimmed, "else").is_some() {
            self.statements += 1;
            return self.switch_to_else(number);
        }
        if keyword(trimmed, "endif").is_some()
            || keyword(trimmed, "end").is_some_and(|r| keyword(r.trim_start(), "if").is_some())
        {
            self.statements += 1;
            return self.close_if(number);
        }
        if let Some(rest) = keyword(trimmed, "if") {
            self.statements += 1;
            let (condition, _) = paren_group(strip_then(rest));
            self.push(Frame::If {
                condition,
                then_body: Vec::new(),
                else_body: Vec::new(),
                in_else: false,
                implicit: false,
                line: number,
            });
            return Ok(());
        }
        if keyword(trimmed, "endwhile").is_some()
            || keyword(trimmed, "end").is_some_and(|r| keyword(r.trim_start(), "while").is_some())
        {
            self.statements += 1;
            return self.close_while(number);
        }
        if let Some(rest) = keyword(trimmed, "while") {
            self.statements += 1;
            let (condition, _) = paren_group(strip_is(rest));
            self.push(Frame::While {
                condition,
                body: Vec::new(),
                line: number,
            });
            return Ok(());
        }
        if let Some(rest) = keyword(trimmed, "repeat") {
            let rest = rest.trim_start();
            if rest.is_empty() {
                self.statements += 1;
                self.push(Frame::Repeat {
                    body: Vec::new(),
                    line: number,
                });
                return Ok(());
            }
            if let Some(cond) = keyword(rest, "while") {
                self.statements += 1;
                let (condition, _) = paren_group(strip_is(cond));
                return self.close_repeat(number, condition);
            }
        }

        self.diagnostics
            .unknown(number, format!("unrecognized statement `{trimmed}`"))
    }

    fn push(&mut self, frame: Frame) {
        self.pushes += 1;
        self.stack.push(frame);
    }

    fn pop(&mut self) -> Option<Frame> {
        let frame = self.stack.pop();
        if frame.is_some() {
            self.pops += 1;
        }
        frame
    }

    fn current_body(&mut self) -> &mut Vec<FlowElement> {
        match self.stack.last_mut() {
            None => &mut self.diagram.preamble,
            Some(Frame::Partition { body, .. })
            | Some(Frame::While { body, .. })
            | Some(Frame::Repeat { body, .. }) => body,
            Some(Frame::If {
                then_body,
                else_body,
                in_else,
                ..
            }) => {
                if *in_else {
                    else_body
                } else {
                    then_body
                }
            }
        }
    }

    fn finish_action(&mut self, pending: PendingAction) -> Result<(), ParseError> {
        let text = normalize_text(&pending.pieces.join(" "));
        if text.is_empty() {
            return self
                .diagnostics
                .unknown(pending.line, "action with empty text".into());
        }
        self.current_body().push(FlowElement::Action(ActionNode {
            text,
            source_line: pending.line,
        }));
        Ok(())
    }

    fn open_partition(&mut self, number: usize, rest: &str) -> Result<(), ParseError> {
        if let Some(open) = self.stack.last() {
            return Err(ParseError::new(
                ParseErrorKind::UnbalancedBlock,
                number,
                format!(
                    "partition opened inside an unclosed {} (line {})",
                    open.describe(),
                    open.line()
                ),
            ));
        }
        let mut rest = rest.trim();
        let has_brace = rest.ends_with('{');
        if has_brace {
            rest = rest[..rest.len() - 1].trim_end();
        }
        // Drop a trailing color such as `#LightBlue`.
        if let Some(idx) = rest.rfind(" #") {
            if !rest[idx + 2..].contains(char::is_whitespace) && !rest[idx..].contains('"') {
                rest = rest[..idx].trim_end();
            }
        }
        let name = match (rest.find('"'), rest.rfind('"')) {
            (Some(first), Some(last)) if last > first => &rest[first + 1..last],
            _ => rest,
        };
        self.expect_brace = !has_brace;
        self.push(Frame::Partition {
            raw_name: normalize_text(name),
            body: Vec::new(),
            line: number,
        });
        Ok(())
    }

    fn close_partition(&mut self, number: usize) -> Result<(), ParseError> {
        match self.stack.last() {
            Some(Frame::Partition { .. }) => {}
            Some(other) => {
                return Err(ParseError::new(
                    ParseErrorKind::UnbalancedBlock,
                    number,
                    format!(
                        "`}}` closes a partition but the innermost open block is {} (line {})",
                        other.describe(),
                        other.line()
                    ),
                ))
            }
            None => {
                return Err(ParseError::new(
                    ParseErrorKind::UnbalancedBlock,
                    number,
                    "`}` without an open partition",
                ))
            }
        }
        let Some(Frame::Partition {
            raw_name,
            body,
            line,
        }) = self.pop()
        else {
            unreachable!("checked above");
        };
        let partition = Partition::new(raw_name, body);
        match self
            .diagram
            .partitions
            .iter_mut()
            .find(|p| p.canonical_key == partition.canonical_key)
        {
            Some(existing) => {
                self.diagnostics.warn(
                    line,
                    format!(
                        "partition `{}` repeats `{}`; bodies merged",
                        partition.raw_name, existing.raw_name
                    ),
                );
                existing.body.extend(partition.body);
            }
            None => self.diagram.partitions.push(partition),
        }
        Ok(())
    }

    fn innermost_if(&mut self, number: usize, what: &str) -> Result<&mut Frame, ParseError> {
        match self.stack.last_mut() {
            Some(frame @ Frame::If { .. }) => Ok(frame),
            Some(other) => Err(ParseError::new(
                ParseErrorKind::UnbalancedBlock,
                number,
                format!(
                    "`{what}` but the innermost open block is {} (line {})",
                    other.describe(),
                    other.line()
                ),
            )),
            None => Err(ParseError::new(
                ParseErrorKind::UnbalancedBlock,
                number,
                format!("`{what}` without an open if"),
            )),
        }
    }

    fn switch_to_else(&mut self, number: usize) -> Result<(), ParseError> {
        let Frame::If { in_else, .. } = self.innermost_if(number, "else")? else {
            unreachable!("innermost_if returns an if frame");
        };
        if *in_else {
            return Err(ParseError::new(
                ParseErrorKind::UnbalancedBlock,
                number,
                "second `else` in the same if",
            ));
        }
        *in_else = true;
        Ok(())
    }

    fn open_elseif(&mut self, number: usize, rest: &str) -> Result<(), ParseError> {
        self.switch_to_else(number)?;
        let (condition, _) = paren_group(strip_then(rest));
        self.push(Frame::If {
            condition,
            then_body: Vec::new(),
            else_body: Vec::new(),
            in_else: false,
            implicit: true,
            line: number,
        });
        Ok(())
    }

    fn close_if(&mut self, number: usize) -> Result<(), ParseError> {
        self.innermost_if(number, "endif")?;
        loop {
            let Some(Frame::If {
                condition,
                then_body,
                else_body,
                implicit,
                ..
            }) = self.pop()
            else {
                unreachable!("elseif frames always sit on an if frame");
            };
            self.current_body().push(FlowElement::Branch {
                condition,
                then_body,
                else_body,
            });
            if !implicit {
                return Ok(());
            }
        }
    }

    fn close_while(&mut self, number: usize) -> Result<(), ParseError> {
        match self.stack.last() {
            Some(Frame::While { .. }) => {}
            other => return Err(mismatched_close(number, "endwhile", other)),
        }
        let Some(Frame::While {
            condition, body, ..
        }) = self.pop()
        else {
            unreachable!("checked above");
        };
        self.current_body().push(FlowElement::Loop {
            kind: LoopKind::While,
            condition,
            body,
        });
        Ok(())
    }

    fn close_repeat(&mut self, number: usize, condition: String) -> Result<(), ParseError> {
        match self.stack.last() {
            Some(Frame::Repeat { .. }) => {}
            other => return Err(mismatched_close(number, "repeat while", other)),
        }
        let Some(Frame::Repeat { body, .. }) = self.pop() else {
            unreachable!("checked above");
        };
        self.current_body().push(FlowElement::Loop {
            kind: LoopKind::Repeat,
            condition,
            body,
        });
        Ok(())
    }

    fn finish(mut self, end_line: usize) -> Result<Parsed<ActivityDiagram>, ParseError> {
        if let Some(pending) = self.pending.take() {
            self.diagnostics.unknown(
                pending.line,
                "action is never terminated by `;` before @enduml".into(),
            )?;
        }
        if let Some(open) = self.stack.last() {
            return Err(ParseError::new(
                ParseErrorKind::UnbalancedBlock,
                open.line(),
                format!(
                    "{} is still open at @enduml (line {end_line})",
                    open.describe()
                ),
            ));
        }
        if self.statements == 0 {
            return Err(ParseError::new(
                ParseErrorKind::EmptyDocument,
                end_line,
                "no activity statements between @startuml and @enduml",
            ));
        }
        debug_assert_eq!(self.pushes, self.pops);
        Ok(Parsed {
            diagram: self.diagram,
            warnings: self.diagnostics.warnings,
            scope_pushes: self.pushes,
            scope_pops: self.pops,
        })
    }
}

fn mismatched_close(number: usize, what: &str, open: Option<&Frame>) -> ParseError {
    let message = match open {
        Some(frame) => format!(
            "`{what}` but the innermost open block is {} (line {})",
            frame.describe(),
            frame.line()
        ),
        None => format!("`{what}` without a matching opener"),
    };
    ParseError::new(ParseErrorKind::UnbalancedBlock, number, message)
}

/// `(c) then (yes)` -> `(c)`; labels after `then` are dropped.
fn strip_then(rest: &str) -> &str {
    let rest = rest.trim();
    if rest.starts_with('(') {
        return rest;
    }
    match rest.to_ascii_lowercase().rfind(" then") {
        Some(idx) => &rest[..idx],
        None => rest,
    }
}

/// `(c) is (label)` -> `(c)`; bare conditions lose a trailing ` is (..)`.
fn strip_is(rest: &str) -> &str {
    let rest = rest.trim();
    if rest.starts_with('(') {
        return rest;
    }
    let lower = rest.to_ascii_lowercase();
    match lower.rfind(" is ") {
        Some(idx) => &rest[..idx],
        None => rest,
    }
}
