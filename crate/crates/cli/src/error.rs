use std::io;
use std::path::PathBuf;

use oowm_core::embedding::EmbedError;
use oowm_core::eval::{CorpusError, EvalError};
use oowm_core::grpo::GrpoError;
use oowm_core::parser::ParseError;
use serde_json::{json, Value};
use thiserror::Error;

/// Failures surfaced by a subcommand. Data problems exit with 1, failures of
/// the environment (embedding service, output device) with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: ParseError },
    #[error("line {line}: {message}")]
    Input {
        kind: &'static str,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("line {line}: {source}")]
    Embedding { line: usize, source: EmbedError },
    #[error("{}{source}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Grpo {
        line: Option<usize>,
        source: GrpoError,
    },
    #[error("{count} of {total} input lines were rejected")]
    Rejected { count: usize, total: usize },
}

impl CliError {
    pub fn kind(&self) -> &str {
        match self {
            CliError::Usage(_) => "usage_error",
            CliError::Config(_) => "config_error",
            CliError::Read { .. } => "io_error",
            CliError::Write { .. } => "write_error",
            CliError::Parse { source, .. } => source.kind.as_str(),
            CliError::Input { kind, .. } => kind,
            CliError::Corpus(e) => e.kind(),
            CliError::Eval(e) => e.kind(),
            CliError::Embedding { source, .. } => source.kind(),
            CliError::Grpo { source, .. } => source.kind(),
            CliError::Rejected { .. } => "rejected_records",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Embedding { .. } | CliError::Write { .. } => 2,
            CliError::Eval(e) if e.is_infrastructure() => 2,
            _ => 1,
        }
    }

    fn line(&self) -> Option<usize> {
        match self {
            CliError::Parse { source, .. } => Some(source.line),
            CliError::Input { line, .. } | CliError::Embedding { line, .. } => Some(*line),
            CliError::Grpo { line, .. } => *line,
            CliError::Corpus(e) => e.line(),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut error = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let Some(line) = self.line() {
            error["line"] = json!(line);
        }
        json!({ "error": error })
    }
}
