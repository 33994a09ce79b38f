use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parser::check_markers;
use crate::reward::{reference_payload, Paradigm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One line of an evaluation corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    /// Raw model output, tags included.
    pub prediction: String,
    /// Reference activity diagram.
    pub reference: String,
    pub paradigm: Paradigm,
    /// Prediction already converted to an activity diagram; required for
    /// `text` records when scoring structure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_structured: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// A line that could not be read as a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LintIssue {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub records: Vec<EvalRecord>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

impl CorpusError {
    pub fn kind(&self) -> &'static str {
        match self {
            CorpusError::Io { .. } => "io_error",
            CorpusError::Schema { .. } => "schema_error",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            CorpusError::Io { .. } => None,
            CorpusError::Schema { line, .. } => Some(*line),
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&text)
}

/// Reads newline-delimited JSON records. Blank lines are skipped, unreadable
/// lines become [`Reject`]s, and a repeated `id` fails the whole corpus.
pub fn parse_corpus(text: &str) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (index, line) in text.lines().enumerate() {
        let number = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = match serde_json::from_str(line) {
            Ok(record) => record,
            Err(e) => {
                corpus.rejects.push(Reject {
                    line: number,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if record.reference.trim().is_empty() {
            corpus.rejects.push(Reject {
                line: number,
                message: format!("record `{}` has an empty reference", record.id),
            });
            continue;
        }
        if let Some(first) = seen.insert(record.id.clone(), number) {
            return Err(CorpusError::Schema {
                line: number,
                message: format!("duplicate id `{}` (first seen on line {first})", record.id),
            });
        }
        corpus.records.push(record);
    }
    Ok(corpus)
}

impl Corpus {
    /// Consistency warnings between paradigm and record contents.
    pub fn lint(&self) -> Vec<LintIssue> {
        let mut issues = Vec::new();
        for record in &self.records {
            if !check_markers(reference_payload(&record.reference)) {
                issues.push(LintIssue {
                    id: record.id.clone(),
                    message: "reference is not a PlantUML diagram".into(),
                });
            }
            if record.paradigm == Paradigm::Text && record.prediction_structured.is_none() {
                issues.push(LintIssue {
                    id: record.id.clone(),
                    message: "text record without prediction_structured".into(),
                });
            }
        }
        issues
    }
}
