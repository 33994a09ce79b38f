//! Structure-aware evaluation of prediction corpora.
//!
//! Each record's predicted plan and reference are split into the three scored
//! partitions and aligned node-by-node with greedy matching. A matched pair
//! at or above the threshold is a true positive. A matched pair below it
//! counts as a false positive for the predicted node and a false negative for
//! the reference node. Unmatched predicted nodes are false positives and
//! unmatched reference nodes are false negatives. Recall is the task
//! execution success rate.

mod corpus;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::greedy_match;
use crate::diagram::{ActivityDiagram, CanonicalKey, CollectOptions};
use crate::embedding::{EmbedError, EmbeddingProvider};
use crate::envelope::{split_envelope_with, EnvelopeOptions};
use crate::parser::{check_markers, parse_activity, ParseMode};
use crate::reward::{parse_reference, reference_payload, Paradigm};

pub use corpus::{
    load_corpus, parse_corpus, Corpus, CorpusError, EvalRecord, LintIssue, Reject, Split,
};
pub use report::{emit_report, render_report, write_atomic, ReportFormat};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "TP")]
    TruePositive,
    #[serde(rename = "FP")]
    FalsePositive,
    #[serde(rename = "FN")]
    FalseNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeVerdict {
    pub classification: Classification,
    pub similarity: Option<f64>,
    pub partition: CanonicalKey,
    pub pred_index: Option<usize>,
    pub ref_index: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn merge(self, other: Counts) -> Counts {
        Counts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }

    pub fn record(&mut self, classification: Classification) {
        match classification {
            Classification::TruePositive => self.tp += 1,
            Classification::FalsePositive => self.fp += 1,
            Classification::FalseNegative => self.fn_ += 1,
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Order-independent mean: values are sorted before summation.
fn stable_mean(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub threshold: f64,
    pub collect: CollectOptions,
    pub envelope: EnvelopeOptions,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            threshold: DEFAULT_THRESHOLD,
            collect: CollectOptions::default(),
            envelope: EnvelopeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("record `{id}`: reference does not parse: {message}")]
    ReferenceParse { id: String, message: String },
    #[error("record `{id}`: text record has no prediction_structured field")]
    MissingStructured { id: String },
    #[error("record `{id}`: {source}")]
    Embedding {
        id: String,
        #[source]
        source: EmbedError,
    },
}

impl EvalError {
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::ReferenceParse { .. } => "reference_parse_error",
            EvalError::MissingStructured { .. } => "missing_prediction_structured",
            EvalError::Embedding { source, .. } => source.kind(),
        }
    }

    pub fn is_infrastructure(&self) -> bool {
        matches!(self, EvalError::Embedding { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEvaluation {
    pub id: String,
    pub verdicts: Vec<NodeVerdict>,
    /// Cosine of every matched pair, in partition then selection order.
    pub matched_similarities: Vec<f64>,
    /// Mean of `matched_similarities`, 0.0 when nothing matched.
    pub mean_similarity: f64,
    pub pred_nodes: usize,
    pub ref_nodes: usize,
    /// The prediction carried no parseable diagram.
    pub parse_failure: bool,
}

impl RecordEvaluation {
    pub fn counts(&self) -> Counts {
        let mut counts = Counts::default();
        for verdict in &self.verdicts {
            counts.record(verdict.classification);
        }
        counts
    }
}

fn predicted_diagram(
    record: &EvalRecord,
    envelope: EnvelopeOptions,
) -> Result<Option<ActivityDiagram>, EvalError> {
    let source = match record.paradigm {
        Paradigm::Oowm => split_envelope_with(&record.prediction, envelope)
            .answer
            .unwrap_or_default(),
        Paradigm::Text => {
            reference_payload(record.prediction_structured.as_deref().ok_or_else(|| {
                EvalError::MissingStructured {
                    id: record.id.clone(),
                }
            })?)
            .to_string()
        }
    };
    if !check_markers(&source) {
        return Ok(None);
    }
    Ok(parse_activity(&source, ParseMode::Lenient)
        .ok()
        .map(|p| p.diagram))
}

/// Classifies every predicted and reference node of one record.
pub fn evaluate_record<P: EmbeddingProvider + ?Sized>(
    record: &EvalRecord,
    provider: &P,
    config: &EvalConfig,
) -> Result<RecordEvaluation, EvalError> {
    let reference = parse_reference(&record.reference).map_err(|e| EvalError::ReferenceParse {
        id: record.id.clone(),
        message: e.to_string(),
    })?;
    let prediction = predicted_diagram(record, config.envelope)?;
    let parse_failure = prediction.is_none();
    let prediction = prediction.unwrap_or_default();

    let texts = |d: &ActivityDiagram, key: &CanonicalKey| -> Vec<String> {
        d.collect_action_nodes_with(key, config.collect)
            .into_iter()
            .map(|n| n.text)
            .collect()
    };
    let slots: Vec<(CanonicalKey, Vec<String>, Vec<String>)> = CanonicalKey::SCORED
        .into_iter()
        .map(|key| {
            let pred = texts(&prediction, &key);
            let refs = texts(&reference, &key);
            (key, pred, refs)
        })
        .collect();
    let all: Vec<&str> = slots
        .iter()
        .flat_map(|(_, p, r)| p.iter().chain(r).map(String::as_str))
        .collect();
    let vectors = if all.is_empty() {
        Vec::new()
    } else {
        provider
            .embed_batch(&all)
            .map_err(|source| EvalError::Embedding {
                id: record.id.clone(),
                source,
            })?
    };

    let mut evaluation = RecordEvaluation {
        id: record.id.clone(),
        verdicts: Vec::new(),
        matched_similarities: Vec::new(),
        mean_similarity: 0.0,
        pred_nodes: 0,
        ref_nodes: 0,
        parse_failure,
    };
    let mut offset = 0;
    for (key, pred, refs) in slots {
        let pred_vecs = &vectors[offset..offset + pred.len()];
        offset += pred.len();
        let ref_vecs = &vectors[offset..offset + refs.len()];
        offset += refs.len();
        evaluation.pred_nodes += pred.len();
        evaluation.ref_nodes += refs.len();

        let matches = greedy_match(pred_vecs, ref_vecs).map_err(|source| EvalError::Embedding {
            id: record.id.clone(),
            source,
        })?;
        let verdict = |classification, similarity, pred_index, ref_index| NodeVerdict {
            classification,
            similarity,
            partition: key.clone(),
            pred_index,
            ref_index,
        };
        for pair in &matches.pairs {
            evaluation.matched_similarities.push(pair.similarity);
            let (p, r, s) = (
                Some(pair.pred_index),
                Some(pair.ref_index),
                Some(pair.similarity),
            );
            if pair.similarity >= config.threshold {
                evaluation
                    .verdicts
                    .push(verdict(Classification::TruePositive, s, p, r));
            } else {
                evaluation
                    .verdicts
                    .push(verdict(Classification::FalsePositive, s, p, None));
                evaluation
                    .verdicts
                    .push(verdict(Classification::FalseNegative, s, None, r));
            }
        }
        for &i in &matches.unmatched_pred {
            evaluation
                .verdicts
                .push(verdict(Classification::FalsePositive, None, Some(i), None));
        }
        for &j in &matches.unmatched_ref {
            evaluation
                .verdicts
                .push(verdict(Classification::FalseNegative, None, None, Some(j)));
        }
    }
    evaluation.mean_similarity = stable_mean(&mut evaluation.matched_similarities.clone());
    Ok(evaluation)
}

/// Evaluates records on a pool of `parallelism` threads. Results keep corpus
/// order; on failure the error of the earliest failing record is returned.
pub fn evaluate_corpus<P: EmbeddingProvider + ?Sized>(
    records: &[EvalRecord],
    provider: &P,
    config: &EvalConfig,
    parallelism: usize,
) -> Result<Vec<RecordEvaluation>, EvalError> {
    let run = || -> Vec<Result<RecordEvaluation, EvalError>> {
        records
            .par_iter()
            .map(|record| evaluate_record(record, provider, config))
            .collect()
    };
    let results = match rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
    {
        Ok(pool) => pool.install(run),
        Err(_) => records
            .iter()
            .map(|record| evaluate_record(record, provider, config))
            .collect(),
    };
    results.into_iter().collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Pool counts over the whole corpus, then compute the metrics once.
    #[default]
    Micro,
    /// Average per-record metrics.
    Macro,
}

impl fmt::Display for Averaging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Averaging::Micro => "micro",
            Averaging::Macro => "macro",
        })
    }
}

impl FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "micro" => Ok(Averaging::Micro),
            "macro" => Ok(Averaging::Macro),
            other => Err(format!(
                "unknown averaging `{other}` (expected micro|macro)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionMetrics {
    pub similarity: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
    pub matched_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean cosine over matched pairs.
    pub similarity: f64,
    pub precision: f64,
    /// Task execution success rate.
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
    pub matched_pairs: usize,
    /// Always micro-averaged.
    pub per_partition: BTreeMap<CanonicalKey, PartitionMetrics>,
    pub n_records: usize,
    pub n_parse_failures: usize,
    pub averaging: Averaging,
    pub threshold: f64,
    /// Set when the corpus had no records; every metric is then 0.
    pub empty_corpus: bool,
}

/// Folds per-record evaluations into corpus metrics. The result does not
/// depend on record order.
pub fn aggregate(
    evaluations: &[RecordEvaluation],
    threshold: f64,
    averaging: Averaging,
) -> MetricsReport {
    let mut counts = Counts::default();
    let mut partition_counts: BTreeMap<CanonicalKey, Counts> = BTreeMap::new();
    let mut partition_sims: BTreeMap<CanonicalKey, Vec<f64>> = BTreeMap::new();
    let mut all_sims = Vec::new();
    let mut n_parse_failures = 0;

    for evaluation in evaluations {
        counts = counts.merge(evaluation.counts());
        n_parse_failures += usize::from(evaluation.parse_failure);
        for verdict in &evaluation.verdicts {
            partition_counts
                .entry(verdict.partition.clone())
                .or_default()
                .record(verdict.classification);
            // Each matched pair appears once with a reference index.
            if let (Some(similarity), Some(_)) = (verdict.similarity, verdict.ref_index) {
                partition_sims
                    .entry(verdict.partition.clone())
                    .or_default()
                    .push(similarity);
            }
        }
        all_sims.extend(&evaluation.matched_similarities);
    }

    let per_partition = partition_counts
        .into_iter()
        .map(|(key, c)| {
            let mut sims = partition_sims.remove(&key).unwrap_or_default();
            let metrics = PartitionMetrics {
                similarity: stable_mean(&mut sims),
                precision: c.precision(),
                recall: c.recall(),
                f1: c.f1(),
                counts: c,
                matched_pairs: sims.len(),
            };
            (key, metrics)
        })
        .collect();

    let matched_pairs = all_sims.len();
    let (similarity, precision, recall, f1) = match averaging {
        Averaging::Micro => (
            stable_mean(&mut all_sims),
            counts.precision(),
            counts.recall(),
            counts.f1(),
        ),
        Averaging::Macro => {
            let column = |f: &dyn Fn(&RecordEvaluation) -> f64| {
                stable_mean(&mut evaluations.iter().map(f).collect::<Vec<_>>())
            };
            let similarity = stable_mean(
                &mut evaluations
                    .iter()
                    .filter(|e| !e.matched_similarities.is_empty())
                    .map(|e| e.mean_similarity)
                    .collect::<Vec<_>>(),
            );
            (
                similarity,
                column(&|e| e.counts().precision()),
                column(&|e| e.counts().recall()),
                column(&|e| e.counts().f1()),
            )
        }
    };

    MetricsReport {
        similarity,
        precision,
        recall,
        f1,
        counts,
        matched_pairs,
        per_partition,
        n_records: evaluations.len(),
        n_parse_failures,
        averaging,
        threshold,
        empty_corpus: evaluations.is_empty(),
    }
}
