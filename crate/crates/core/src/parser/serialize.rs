use std::fmt::Write as _;

use crate::diagram::{ActivityDiagram, ClassDiagram, FlowElement, LoopKind, RelationKind};

const INDENT: &str = "  ";

/// Canonical PlantUML for an activity diagram. Preamble statements precede
/// the partitions; `start`/`stop` are emitted when flagged.
pub fn serialize_activity(diagram: &ActivityDiagram) -> String {
    let mut out = String::from("@startuml\n");
    if diagram.has_start {
        out.push_str("start\n");
    }
    write_body(&mut out, &diagram.preamble, 0);
    for partition in &diagram.partitions {
        let _ = writeln!(out, "partition \"{}\" {{", partition.raw_name);
        write_body(&mut out, &partition.body, 1);
        out.push_str("}\n");
    }
    if diagram.has_stop {
        out.push_str("stop\n");
    }
    out.push_str("@enduml\n");
    out
}

fn write_body(out: &mut String, body: &[FlowElement], depth: usize) {
    let pad = INDENT.repeat(depth);
    for element in body {
        match element {
            FlowElement::Action(node) => {
                let _ = writeln!(out, "{pad}:{};", node.text);
            }
            FlowElement::Branch {
                condition,
                then_body,
                else_body,
            } => {
                let _ = writeln!(out, "{pad}if ({condition}) then (yes)");
                write_body(out, then_body, depth + 1);
                if !else_body.is_empty() {
                    let _ = writeln!(out, "{pad}else (no)");
                    write_body(out, else_body, depth + 1);
                }
                let _ = writeln!(out, "{pad}endif");
            }
            FlowElement::Loop {
                kind: LoopKind::While,
                condition,
                body,
            } => {
                let _ = writeln!(out, "{pad}while ({condition})");
                write_body(out, body, depth + 1);
                let _ = writeln!(out, "{pad}endwhile");
            }
            FlowElement::Loop {
                kind: LoopKind::Repeat,
                condition,
                body,
            } => {
                let _ = writeln!(out, "{pad}repeat");
                write_body(out, body, depth + 1);
                let _ = writeln!(out, "{pad}repeat while ({condition})");
            }
        }
    }
}

fn class_ref(name: &str) -> String {
    if !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '.')
    {
        name.to_string()
    } else {
        format!("\"{name}\"")
    }
}

/// Canonical PlantUML for a class diagram. Relations are written with the
/// decorated end on the left, except associations (`from --> to`).
pub fn serialize_class(diagram: &ClassDiagram) -> String {
    let mut out = String::from("@startuml\n");
    for class in &diagram.classes {
        let _ = writeln!(out, "class {} {{", class_ref(&class.name));
        for attribute in &class.attributes {
            match &attribute.type_annotation {
                Some(ty) => {
                    let _ = writeln!(out, "{INDENT}{} : {ty}", attribute.name);
                }
                // A bare multi-word name would reparse as `Type name`.
                None if attribute.name.contains(char::is_whitespace) => {
                    let _ = writeln!(out, "{INDENT}{} :", attribute.name);
                }
                None => {
                    let _ = writeln!(out, "{INDENT}{}", attribute.name);
                }
            }
        }
        for method in &class.methods {
            let _ = writeln!(out, "{INDENT}{method}");
        }
        out.push_str("}\n");
    }
    for relation in &diagram.relations {
        let from = class_ref(&relation.from);
        let to = class_ref(&relation.to);
        let _ = match relation.kind {
            RelationKind::Inheritance => write!(out, "{to} <|-- {from}"),
            RelationKind::Aggregation => write!(out, "{to} o-- {from}"),
            RelationKind::Composition => write!(out, "{to} *-- {from}"),
            RelationKind::Association => write!(out, "{from} --> {to}"),
        };
        if let Some(label) = &relation.label {
            let _ = write!(out, " : {label}");
        }
        out.push('\n');
    }
    out.push_str("@enduml\n");
    out
}
