use std::sync::OnceLock;

use regex::Regex;

use super::{
    body_lines, keyword, normalize_text, Decorations, Diagnostics, ParseError, ParseErrorKind,
    ParseMode, Parsed,
};
use crate::diagram::{Attribute, ClassDecl, ClassDiagram, Relation, RelationKind};

enum Frame {
    Class { index: usize, line: usize },
    Group { line: usize },
}

fn relation_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(
            r#"^(?P<left>"[^"]+"|[\w.]+)\s*(?:"[^"]*"\s*)?(?P<lhead><\||<|o|\*)?(?P<line>-+|\.+)(?P<rhead>\|>|>|o|\*)?\s*(?:"[^"]*"\s*)?(?P<right>"[^"]+"|[\w.]+)\s*(?::(?P<label>.*))?$"#,
        )
        .expect("relation pattern compiles")
    })
}

/// Parses a class diagram: `class NAME { members }` blocks and relation
/// lines using `<|--` (inheritance), `o--` (aggregation), `*--`
/// (composition) and `--` / `-->` (association), in either direction.
/// `package`/`namespace`/`together` blocks group classes and are otherwise
/// transparent.
pub fn parse_class(src: &str, mode: ParseMode) -> Result<Parsed<ClassDiagram>, ParseError> {
    let (lines, end_line) = body_lines(src)?;
    let mut diagram = ClassDiagram::default();
    let mut diagnostics = Diagnostics::new(mode);
    let mut decorations = Decorations::default();
    let mut stack: Vec<Frame> = Vec::new();
    let (mut pushes, mut pops, mut statements) = (0usize, 0usize, 0usize);

    for (number, raw) in lines {
        let trimmed = raw.trim();
        if trimmed.is_empty() || decorations.consume(trimmed) {
            continue;
        }
        if trimmed == "}" {
            statements += 1;
            if stack.pop().is_none() {
                return Err(ParseError::new(
                    ParseErrorKind::UnbalancedBlock,
                    number,
                    "`}` without an open class or package",
                ));
            }
            pops += 1;
            continue;
        }
        if let Some(Frame::Class { index, .. }) = stack.last() {
            let index = *index;
            statements += 1;
            member(
                &mut diagram.classes[index],
                trimmed,
                number,
                &mut diagnostics,
            )?;
            continue;
        }
        if let Some(rest) = class_keyword(trimmed) {
            statements += 1;
            let Some((name, opens, closes)) = class_header(rest) else {
                diagnostics.unknown(
                    number,
                    format!("class declaration without a name `{trimmed}`"),
                )?;
                continue;
            };
            let index = match diagram.classes.iter().position(|c| c.name == name) {
                Some(index) => index,
                None => {
                    diagram.classes.push(ClassDecl::new(name));
                    diagram.classes.len() - 1
                }
            };
            if opens && !closes {
                pushes += 1;
                stack.push(Frame::Class {
                    index,
                    line: number,
                });
            }
            continue;
        }
        if ["package", "namespace", "together"]
            .iter()
            .any(|kw| keyword(trimmed, kw).is_some())
        {
            statements += 1;
            if trimmed.ends_with('{') {
                pushes += 1;
                stack.push(Frame::Group { line: number });
            }
            continue;
        }
        if let Some(relation) = relation(trimmed) {
            statements += 1;
            diagram.relations.push(relation);
            continue;
        }
        diagnostics.unknown(number, format!("unrecognized statement `{trimmed}`"))?;
    }

    if let Some(open) = stack.last() {
        let (what, line) = match open {
            Frame::Class { index, line } => {
                (format!("class `{}`", diagram.classes[*index].name), *line)
            }
            Frame::Group { line } => ("package".to_string(), *line),
        };
        return Err(ParseError::new(
            ParseErrorKind::UnbalancedBlock,
            line,
            format!("{what} is still open at @enduml (line {end_line})"),
        ));
    }
    if statements == 0 {
        return Err(ParseError::new(
            ParseErrorKind::EmptyDocument,
            end_line,
            "no class statements between @startuml and @enduml",
        ));
    }
    diagram.refresh_dangling();
    Ok(Parsed {
        diagram,
        warnings: diagnostics.warnings,
        scope_pushes: pushes,
        scope_pops: pops,
    })
}

fn class_keyword(line: &str) -> Option<&str> {
    if let Some(rest) = keyword(line, "abstract") {
        let rest = rest.trim_start();
        return Some(keyword(rest, "class").unwrap_or(rest));
    }
    keyword(line, "class")
}

/// Name of the declared class and whether the line opens and closes a body.
fn class_header(rest: &str) -> Option<(String, bool, bool)> {
    let rest = rest.trim();
    let (name, tail) = if let Some(quoted) = rest.strip_prefix('"') {
        let end = quoted.find('"')?;
        (&quoted[..end], &quoted[end + 1..])
    } else {
        let end = rest
            .find(|c: char| c.is_whitespace() || c == '{' || c == '<')
            .unwrap_or(rest.len());
        (&rest[..end], &rest[end..])
    };
    let name = normalize_text(name);
    if name.is_empty() {
        return None;
    }
    let tail = tail.trim();
    let opens = tail.contains('{');
    let closes = opens && tail.ends_with('}');
    Some((name, opens, closes))
}

fn is_separator(line: &str) -> bool {
    let mut chars = line.chars().filter(|c| !c.is_whitespace());
    chars
        .next()
        .is_some_and(|first| matches!(first, '-' | '.' | '=' | '_') && chars.all(|c| c == first))
        || (line.len() >= 4
            && ["--", "..", "==", "__"]
                .iter()
                .any(|m| line.starts_with(m) && line.ends_with(m)))
}

/// Strips visibility markers and `{static}`-style modifiers.
fn strip_member_prefix(mut text: &str) -> &str {
    loop {
        let before = text;
        text = text.trim_start().trim_start_matches(['+', '-', '#', '~']);
        for modifier in [
            "{static}",
            "{abstract}",
            "{field}",
            "{method}",
            "{classifier}",
        ] {
            if let Some(head) = text.trim_start().get(..modifier.len()) {
                if head.eq_ignore_ascii_case(modifier) {
                    text = &text.trim_start()[modifier.len()..];
                }
            }
        }
        if text == before {
            return text.trim();
        }
    }
}

fn member(
    class: &mut ClassDecl,
    line: &str,
    number: usize,
    diagnostics: &mut Diagnostics,
) -> Result<(), ParseError> {
    if is_separator(line) {
        return Ok(());
    }
    let text = strip_member_prefix(line);
    if text.is_empty() {
        return diagnostics.unknown(number, format!("empty member `{line}`"));
    }
    if text.contains('(') {
        class.methods.push(normalize_text(text));
        return Ok(());
    }
    let attribute = match text.split_once(':') {
        Some((name, ty)) => Attribute {
            name: normalize_text(name),
            type_annotation: Some(normalize_text(ty)).filter(|t| !t.is_empty()),
        },
        None => {
            let mut tokens: Vec<&str> = text.split_whitespace().collect();
            let name = tokens.pop().unwrap_or_default().to_string();
            Attribute {
                name,
                type_annotation: Some(tokens.join(" ")).filter(|t| !t.is_empty()),
            }
        }
    };
    if attribute.name.is_empty() {
        return diagnostics.unknown(number, format!("attribute without a name `{line}`"));
    }
    if class.attributes.iter().any(|a| a.name == attribute.name) {
        return diagnostics.unknown(
            number,
            format!(
                "duplicate attribute `{}` in class `{}`",
                attribute.name, class.name
            ),
        );
    }
    class.attributes.push(attribute);
    Ok(())
}

fn endpoint(raw: &str) -> String {
    raw.trim_matches('"').to_string()
}

fn relation(line: &str) -> Option<Relation> {
    let caps = relation_pattern().captures(line)?;
    let left = endpoint(&caps["left"]);
    let right = endpoint(&caps["right"]);
    let lhead = caps.name("lhead").map(|m| m.as_str());
    let rhead = caps.name("rhead").map(|m| m.as_str());
    // The decorated end becomes `to`.
    let (kind, from, to) = match (lhead, rhead) {
        (Some("<|"), _) => (RelationKind::Inheritance, right, left),
        (_, Some("|>")) => (RelationKind::Inheritance, left, right),
        (Some("o"), _) => (RelationKind::Aggregation, right, left),
        (_, Some("o")) => (RelationKind::Aggregation, left, right),
        (Some("*"), _) => (RelationKind::Composition, right, left),
        (_, Some("*")) => (RelationKind::Composition, left, right),
        (Some("<"), _) => (RelationKind::Association, right, left),
        _ => (RelationKind::Association, left, right),
    };
    let label = caps
        .name("label")
        .map(|m| normalize_text(m.as_str()))
        .filter(|l| !l.is_empty());
    Some(Relation {
        kind,
        from,
        to,
        label,
        from_dangling: false,
        to_dangling: false,
    })
}
