//! Typed syntax tree for the PlantUML subset used to serialize a world model:
//! activity diagrams (the control policy) and class diagrams (the state
//! abstraction).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Canonical identity of an activity-diagram partition.
///
/// Derived from the raw partition name by [`CanonicalKey::from_raw_name`]:
/// lowercase, drop every non-alphanumeric character, then look for a keyword.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CanonicalKey {
    MessyAreas,
    PriorityOrder,
    SpecificSteps,
    /// Any other partition, keyed by its normalized name.
    Other(String),
}

impl CanonicalKey {
    /// The three partitions that carry the reward, in scoring order.
    pub const SCORED: [CanonicalKey; 3] = [
        CanonicalKey::MessyAreas,
        CanonicalKey::PriorityOrder,
        CanonicalKey::SpecificSteps,
    ];

    pub fn from_raw_name(raw: &str) -> Self {
        let normalized: String = raw
            .chars()
            .flat_map(char::to_lowercase)
            .filter(|c| c.is_alphanumeric())
            .collect();
        if normalized.contains("messy") {
            CanonicalKey::MessyAreas
        } else if normalized.contains("priorit") {
            CanonicalKey::PriorityOrder
        } else if normalized.contains("step") {
            CanonicalKey::SpecificSteps
        } else {
            CanonicalKey::Other(normalized)
        }
    }

    pub fn is_scored(&self) -> bool {
        !matches!(self, CanonicalKey::Other(_))
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CanonicalKey::MessyAreas => f.write_str("messy_areas"),
            CanonicalKey::PriorityOrder => f.write_str("priority_order"),
            CanonicalKey::SpecificSteps => f.write_str("specific_steps"),
            CanonicalKey::Other(name) => write!(f, "other:{name}"),
        }
    }
}

impl FromStr for CanonicalKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "messy_areas" => Ok(CanonicalKey::MessyAreas),
            "priority_order" => Ok(CanonicalKey::PriorityOrder),
            "specific_steps" => Ok(CanonicalKey::SpecificSteps),
            _ => match s.strip_prefix("other:") {
                Some(name) => Ok(CanonicalKey::Other(name.to_string())),
                None => Err(format!("unknown partition key `{s}`")),
            },
        }
    }
}

impl Serialize for CanonicalKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CanonicalKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A `:text;` statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionNode {
    pub text: String,
    pub source_line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    While,
    Repeat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FlowElement {
    Action(ActionNode),
    Branch {
        condition: String,
        then_body: Vec<FlowElement>,
        else_body: Vec<FlowElement>,
    },
    Loop {
        kind: LoopKind,
        condition: String,
        body: Vec<FlowElement>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub raw_name: String,
    pub canonical_key: CanonicalKey,
    pub body: Vec<FlowElement>,
}

impl Partition {
    pub fn new(raw_name: impl Into<String>, body: Vec<FlowElement>) -> Self {
        let raw_name = raw_name.into();
        let canonical_key = CanonicalKey::from_raw_name(&raw_name);
        Partition {
            raw_name,
            canonical_key,
            body,
        }
    }
}

/// Parsed activity diagram (the control policy).
///
/// Statements outside any partition land in `preamble`; they are kept for
/// round-tripping but never take part in partition scoring.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityDiagram {
    pub partitions: Vec<Partition>,
    pub preamble: Vec<FlowElement>,
    pub has_start: bool,
    pub has_stop: bool,
}

/// Controls which nodes [`ActivityDiagram::collect_action_nodes`] yields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CollectOptions {
    /// Also emit branch and loop conditions as pseudo-actions, in document
    /// order. Off by default: conditions are control metadata.
    pub include_conditions: bool,
}

impl ActivityDiagram {
    pub fn partition(&self, key: &CanonicalKey) -> Option<&Partition> {
        self.partitions.iter().find(|p| &p.canonical_key == key)
    }

    /// Actions of the partition with the given key, flattened depth-first in
    /// document order. An absent partition yields an empty list.
    pub fn collect_action_nodes(&self, key: &CanonicalKey) -> Vec<ActionNode> {
        self.collect_action_nodes_with(key, CollectOptions::default())
    }

    pub fn collect_action_nodes_with(
        &self,
        key: &CanonicalKey,
        options: CollectOptions,
    ) -> Vec<ActionNode> {
        let mut out = Vec::new();
        if let Some(partition) = self.partition(key) {
            flatten(&partition.body, options, &mut out);
        }
        out
    }

    /// Actions outside every partition, flattened.
    pub fn preamble_actions(&self) -> Vec<ActionNode> {
        let mut out = Vec::new();
        flatten(&self.preamble, CollectOptions::default(), &mut out);
        out
    }

    pub fn stats(&self) -> DiagramStats {
        let mut stats = DiagramStats {
            partition_keys: self
                .partitions
                .iter()
                .map(|p| p.canonical_key.clone())
                .collect(),
            ..DiagramStats::default()
        };
        tally(&self.preamble, 1, &mut stats);
        for partition in &self.partitions {
            tally(&partition.body, 1, &mut stats);
        }
        stats
    }

    /// Equality that ignores `source_line`, which changes when a diagram is
    /// re-serialized.
    pub fn structurally_eq(&self, other: &ActivityDiagram) -> bool {
        self.without_lines() == other.without_lines()
    }

    fn without_lines(&self) -> ActivityDiagram {
        fn strip(body: &mut [FlowElement]) {
            for element in body {
                match element {
                    FlowElement::Action(node) => node.source_line = 0,
                    FlowElement::Branch {
                        then_body,
                        else_body,
                        ..
                    } => {
                        strip(then_body);
                        strip(else_body);
                    }
                    FlowElement::Loop { body, .. } => strip(body),
                }
            }
        }
        let mut copy = self.clone();
        strip(&mut copy.preamble);
        for partition in &mut copy.partitions {
            strip(&mut partition.body);
        }
        copy
    }

    pub fn is_empty(&self) -> bool {
        !self.has_start && !self.has_stop && self.partitions.is_empty() && self.preamble.is_empty()
    }
}

fn flatten(body: &[FlowElement], options: CollectOptions, out: &mut Vec<ActionNode>) {
    for element in body {
        match element {
            FlowElement::Action(node) => out.push(node.clone()),
            FlowElement::Branch {
                condition,
                then_body,
                else_body,
            } => {
                push_condition(condition, options, out);
                flatten(then_body, options, out);
                flatten(else_body, options, out);
            }
            FlowElement::Loop {
                condition, body, ..
            } => {
                push_condition(condition, options, out);
                flatten(body, options, out);
            }
        }
    }
}

fn push_condition(condition: &str, options: CollectOptions, out: &mut Vec<ActionNode>) {
    if options.include_conditions && !condition.trim().is_empty() {
        // Conditions carry no line information in the tree.
        out.push(ActionNode {
            text: condition.trim().to_string(),
            source_line: out.last().map_or(1, |n| n.source_line),
        });
    }
}

fn tally(body: &[FlowElement], depth: usize, stats: &mut DiagramStats) {
    stats.max_depth = stats.max_depth.max(depth);
    for element in body {
        match element {
            FlowElement::Action(_) => stats.action_count += 1,
            FlowElement::Branch {
                then_body,
                else_body,
                ..
            } => {
                stats.branch_count += 1;
                tally(then_body, depth + 1, stats);
                tally(else_body, depth + 1, stats);
            }
            FlowElement::Loop { body, .. } => {
                stats.loop_count += 1;
                tally(body, depth + 1, stats);
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramStats {
    pub action_count: usize,
    pub branch_count: usize,
    pub loop_count: usize,
    /// Deepest nesting level reached; top-level bodies are depth 1.
    pub max_depth: usize,
    pub partition_keys: Vec<CanonicalKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_annotation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDecl {
    pub name: String,
    pub attributes: Vec<Attribute>,
    pub methods: Vec<String>,
}

impl ClassDecl {
    pub fn new(name: impl Into<String>) -> Self {
        ClassDecl {
            name: name.into(),
            attributes: Vec::new(),
            methods: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    Inheritance,
    Aggregation,
    Composition,
    Association,
}

/// A relation between two classes.
///
/// `to` is the decorated end of the arrow: the parent for inheritance, the
/// whole for aggregation and composition, the arrowhead for a directed
/// association.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub from_dangling: bool,
    #[serde(default)]
    pub to_dangling: bool,
}

/// Parsed class diagram (the state abstraction).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDiagram {
    pub classes: Vec<ClassDecl>,
    pub relations: Vec<Relation>,
}

impl ClassDiagram {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Recomputes the dangling flags of every relation against the declared
    /// classes.
    pub fn refresh_dangling(&mut self) {
        let declared: std::collections::HashSet<&str> =
            self.classes.iter().map(|c| c.name.as_str()).collect();
        for relation in &mut self.relations {
            relation.from_dangling = !declared.contains(relation.from.as_str());
            relation.to_dangling = !declared.contains(relation.to.as_str());
        }
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty() && self.relations.is_empty()
    }
}
