use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Parse UML world-model outputs, score them, and evaluate corpora.
#[derive(Debug, Parser)]
#[command(name = "oowm", version, about, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub run: RunArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every subcommand. Each value resolves as
/// flag > environment > config file > built-in default.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat TOML file with any of the keys below (snake_case)
    #[arg(long, global = true, env = "OOWM_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Embedding provider [default: offline]
    #[arg(long, global = true, env = "OOWM_EMBEDDER", value_enum)]
    pub embedder: Option<EmbedderArg>,

    /// Embedding service base URL; requests go to <URL>/embed [default: http://127.0.0.1:8080]
    #[arg(long, global = true, env = "OOWM_ENDPOINT", value_name = "URL")]
    pub endpoint: Option<String>,

    /// Per-request timeout for the embedding service [default: 10000]
    #[arg(long, global = true, env = "OOWM_TIMEOUT_MS", value_name = "MS")]
    pub timeout_ms: Option<u64>,

    /// Retries after a failed embedding request [default: 3]
    #[arg(long, global = true, env = "OOWM_RETRIES", value_name = "N")]
    pub retries: Option<u32>,

    /// Texts per embedding request [default: 64]
    #[arg(long, global = true, env = "OOWM_BATCH_SIZE", value_name = "N")]
    pub batch_size: Option<usize>,

    /// Similarity at or above which a matched node counts as recovered [default: 0.5]
    #[arg(long, global = true, env = "OOWM_THRESHOLD", value_name = "X")]
    pub threshold: Option<f64>,

    /// Stabilizer added to the group standard deviation [default: 0.0001]
    #[arg(long, global = true, env = "OOWM_EPSILON", value_name = "X")]
    pub epsilon: Option<f64>,

    /// Ratio clip range (clip_eps): ratios are clipped to [1-X, 1+X] [default: 0.2]
    #[arg(long = "clip", global = true, env = "OOWM_CLIP_EPS", value_name = "X")]
    pub clip_eps: Option<f64>,

    /// Diagram parse mode (parse_mode) [default: lenient]
    #[arg(long = "mode", global = true, env = "OOWM_PARSE_MODE", value_enum)]
    pub parse_mode: Option<ParseModeArg>,

    /// Worker threads for evaluation and concurrent embedding requests [default: 4]
    #[arg(long, global = true, env = "OOWM_PARALLELISM", value_name = "N")]
    pub parallelism: Option<usize>,

    /// Reserved; every pipeline is deterministic with the offline embedder [default: 0]
    #[arg(long, global = true, env = "OOWM_SEED", value_name = "N")]
    pub seed: Option<u64>,

    /// Accept <answer> before <think> as well formed
    #[arg(long, global = true)]
    pub allow_answer_first: bool,

    /// Also treat branch and loop conditions as action nodes
    #[arg(long, global = true)]
    pub include_conditions: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderArg {
    /// Deterministic feature-hashing embedder, no network
    Offline,
    /// Remote encoder over HTTP
    Service,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseModeArg {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Activity,
    Class,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParadigmArg {
    Oowm,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a PlantUML diagram and print its syntax tree as JSON
    Parse {
        #[arg(long, value_enum, default_value = "activity")]
        kind: KindArg,
        /// Diagram file, or - for stdin
        file: PathBuf,
        /// Write the result here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Count envelope and diagram defects over a JSONL file of model outputs
    Validate {
        /// JSONL with a `prediction` field per line, or - for stdin
        file: PathBuf,
        /// Write the result here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Score predictions against references, one breakdown per input line
    Reward {
        /// Paradigm for lines that do not carry their own
        #[arg(long, value_enum, default_value = "oowm")]
        paradigm: ParadigmArg,
        /// Include node lists and alignments per partition
        #[arg(long)]
        explain: bool,
        /// JSONL with `prediction` and `reference` per line, or - for stdin
        input: PathBuf,
        /// Output JSONL; stdout when omitted
        output: Option<PathBuf>,
    },
    /// Group-normalized advantages for each JSONL line of rewards
    Advantage {
        /// JSONL with `group_id` and `rewards` per line, or - for stdin
        input: PathBuf,
        /// Write the result here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Clipped policy loss over a JSONL file of samples
    GrpoLoss {
        /// JSONL with `ratio` (or `log_prob` and `old_log_prob`) and `advantage`
        input: PathBuf,
        /// Write the result here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Structure-aware precision, recall and F1 over a prediction corpus
    Evaluate {
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Average per-record metrics instead of pooling counts
        #[arg(long = "macro")]
        macro_average: bool,
        /// Corpus JSONL, or - for stdin
        corpus: PathBuf,
        /// Write the result here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Render a stored JSON metrics report in another format
    Report {
        #[arg(long, value_enum, default_value = "markdown")]
        format: FormatArg,
        /// Report produced by `evaluate --format json`
        input: PathBuf,
        /// Write the result here instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}
