//! Cascaded dual-branch reward: `r_total = r_struct + r_semantic`.
//!
//! `r_struct` is the binary envelope check. `r_semantic` depends on the
//! paradigm:
//!
//! * `oowm`: the answer payload must carry `@startuml`/`@enduml` markers and
//!   parse as an activity diagram, otherwise it scores 0. The three scored
//!   partitions of prediction and reference are greedily aligned and each
//!   scores the mean clamped cosine of its matched pairs; a partition missing
//!   from the prediction scores 0. `r_semantic` is the mean of the three.
//! * `text`: clamped cosine between the embedded answer payload and the
//!   embedded reference.
//!
//! Both components are always computed; a malformed envelope does not
//! short-circuit the semantic score.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::alignment::{greedy_match, partition_reward, MatchSet};
use crate::diagram::{ActivityDiagram, CanonicalKey, CollectOptions};
use crate::embedding::{cosine, EmbedError, EmbeddingProvider};
use crate::envelope::{split_envelope_with, structural_reward, Defect, EnvelopeOptions};
use crate::parser::{check_markers, parse_activity, ParseMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    Oowm,
    Text,
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Paradigm::Oowm => "oowm",
            Paradigm::Text => "text",
        })
    }
}

impl FromStr for Paradigm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oowm" => Ok(Paradigm::Oowm),
            "text" => Ok(Paradigm::Text),
            other => Err(format!("invalid paradigm `{other}` (expected oowm|text)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailureCause {
    NoEnvelope,
    UmlSyntax,
    MissingPartition(CanonicalKey),
    ServiceError,
}

impl fmt::Display for FailureCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FailureCause::NoEnvelope => f.write_str("no_envelope"),
            FailureCause::UmlSyntax => f.write_str("uml_syntax"),
            FailureCause::MissingPartition(key) => write!(f, "missing_partition:{key}"),
            FailureCause::ServiceError => f.write_str("service_error"),
        }
    }
}

impl FromStr for FailureCause {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no_envelope" => Ok(FailureCause::NoEnvelope),
            "uml_syntax" => Ok(FailureCause::UmlSyntax),
            "service_error" => Ok(FailureCause::ServiceError),
            _ => s
                .strip_prefix("missing_partition:")
                .ok_or_else(|| format!("unknown failure cause `{s}`"))?
                .parse()
                .map(FailureCause::MissingPartition),
        }
    }
}

impl Serialize for FailureCause {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FailureCause {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardRequest {
    /// Full model output including tags.
    pub prediction_raw: String,
    /// Ground-truth activity diagram (`oowm`) or reference plan (`text`).
    pub reference: String,
    pub paradigm: Paradigm,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RewardOptions {
    pub envelope: EnvelopeOptions,
    pub collect: CollectOptions,
    /// Keep per-partition node lists and match sets in the breakdown.
    pub explain: bool,
}

/// Node texts and alignment of one partition, kept when explaining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionExplanation {
    pub pred_nodes: Vec<String>,
    pub ref_nodes: Vec<String>,
    pub matches: MatchSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_struct: f64,
    pub r_semantic: f64,
    pub r_total: f64,
    pub paradigm: Paradigm,
    pub partition_scores: BTreeMap<CanonicalKey, f64>,
    pub failure_cause: Option<FailureCause>,
    pub envelope_defects: Vec<Defect>,
    /// Scored partitions absent from the reference; flags the record for
    /// dataset linting.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference_missing: Vec<CanonicalKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<BTreeMap<CanonicalKey, PartitionExplanation>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    /// The reference cannot be used; reject the dataset record.
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
}

impl RewardError {
    pub fn kind(&self) -> &'static str {
        match self {
            RewardError::InvalidReference(_) => "invalid_reference",
            RewardError::Embedding(e) => e.kind(),
        }
    }

    pub fn failure_cause(&self) -> Option<FailureCause> {
        match self {
            RewardError::InvalidReference(_) => None,
            RewardError::Embedding(_) => Some(FailureCause::ServiceError),
        }
    }

    /// True for infrastructure failures that a caller may retry.
    pub fn is_infrastructure(&self) -> bool {
        matches!(self, RewardError::Embedding(_))
    }
}

/// Uses the `<answer>` payload when the reference is itself wrapped.
pub fn reference_payload(reference: &str) -> &str {
    let trimmed = reference.trim();
    if let (Some(open), Some(close)) = (trimmed.find("<answer>"), trimmed.find("</answer>")) {
        if open + "<answer>".len() <= close {
            return trimmed[open + "<answer>".len()..close].trim();
        }
    }
    trimmed
}

/// Parses a reference activity diagram leniently.
pub fn parse_reference(reference: &str) -> Result<ActivityDiagram, RewardError> {
    let payload = reference_payload(reference);
    if payload.is_empty() {
        return Err(RewardError::InvalidReference("reference is empty".into()));
    }
    parse_activity(payload, ParseMode::Lenient)
        .map(|parsed| parsed.diagram)
        .map_err(|e| RewardError::InvalidReference(e.to_string()))
}

pub fn compute_reward<P: EmbeddingProvider + ?Sized>(
    request: &RewardRequest,
    provider: &P,
    options: RewardOptions,
) -> Result<RewardBreakdown, RewardError> {
    let envelope = split_envelope_with(&request.prediction_raw, options.envelope);
    let r_struct = structural_reward(&envelope);
    let mut breakdown = RewardBreakdown {
        r_struct,
        r_semantic: 0.0,
        r_total: r_struct,
        paradigm: request.paradigm,
        partition_scores: BTreeMap::new(),
        failure_cause: None,
        envelope_defects: envelope.defects.clone(),
        reference_missing: Vec::new(),
        explanation: None,
    };
    match request.paradigm {
        Paradigm::Oowm => {
            let reference = parse_reference(&request.reference)?;
            let answer = envelope.answer_text();
            let prediction = check_markers(answer)
                .then(|| parse_activity(answer, ParseMode::Lenient).ok())
                .flatten();
            match prediction {
                None => {
                    breakdown.partition_scores =
                        CanonicalKey::SCORED.into_iter().map(|k| (k, 0.0)).collect();
                    breakdown.failure_cause = Some(FailureCause::UmlSyntax);
                }
                Some(parsed) => {
                    score_partitions(
                        &parsed.diagram,
                        &reference,
                        provider,
                        options,
                        &mut breakdown,
                    )?;
                }
            }
        }
        Paradigm::Text => {
            let reference = reference_payload(&request.reference);
            if reference.is_empty() {
                return Err(RewardError::InvalidReference("reference is empty".into()));
            }
            let vectors = provider.embed_batch(&[envelope.answer_text(), reference])?;
            breakdown.r_semantic = cosine(&vectors[0], &vectors[1])?.clamp(0.0, 1.0);
        }
    }
    if breakdown.failure_cause.is_none() && !envelope.well_formed {
        breakdown.failure_cause = Some(FailureCause::NoEnvelope);
    }
    breakdown.r_total = breakdown.r_struct + breakdown.r_semantic;
    Ok(breakdown)
}

fn score_partitions<P: EmbeddingProvider + ?Sized>(
    prediction: &ActivityDiagram,
    reference: &ActivityDiagram,
    provider: &P,
    options: RewardOptions,
    breakdown: &mut RewardBreakdown,
) -> Result<(), RewardError> {
    struct Slot {
        key: CanonicalKey,
        pred: Vec<String>,
        refs: Vec<String>,
    }

    let mut slots = Vec::new();
    for key in CanonicalKey::SCORED {
        let pred_present = prediction.partition(&key).is_some();
        let ref_present = reference.partition(&key).is_some();
        if !ref_present {
            breakdown.reference_missing.push(key.clone());
        }
        if !pred_present && breakdown.failure_cause.is_none() {
            breakdown.failure_cause = Some(FailureCause::MissingPartition(key.clone()));
        }
        let texts = |d: &ActivityDiagram| -> Vec<String> {
            d.collect_action_nodes_with(&key, options.collect)
                .into_iter()
                .map(|n| n.text)
                .collect()
        };
        let (pred, refs) = if pred_present && ref_present {
            (texts(prediction), texts(reference))
        } else {
            (Vec::new(), Vec::new())
        };
        slots.push(Slot { key, pred, refs });
    }

    // One provider call per record.
    let all: Vec<&str> = slots
        .iter()
        .flat_map(|s| s.pred.iter().chain(&s.refs).map(String::as_str))
        .collect();
    let vectors = if all.is_empty() {
        Vec::new()
    } else {
        provider.embed_batch(&all)?
    };

    let mut explanation = BTreeMap::new();
    let mut offset = 0;
    let mut total = 0.0;
    for slot in slots {
        let pred_vecs = &vectors[offset..offset + slot.pred.len()];
        offset += slot.pred.len();
        let ref_vecs = &vectors[offset..offset + slot.refs.len()];
        offset += slot.refs.len();
        let matches = greedy_match(pred_vecs, ref_vecs)?;
        let score = partition_reward(&matches);
        total += score;
        breakdown.partition_scores.insert(slot.key.clone(), score);
        if options.explain {
            explanation.insert(
                slot.key,
                PartitionExplanation {
                    pred_nodes: slot.pred,
                    ref_nodes: slot.refs,
                    matches,
                },
            );
        }
    }
    breakdown.r_semantic = total / CanonicalKey::SCORED.len() as f64;
    if options.explain {
        breakdown.explanation = Some(explanation);
    }
    Ok(())
}
