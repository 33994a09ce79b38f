use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use oowm_core::envelope::{split_envelope_with, Defect};
use oowm_core::eval::{
    aggregate, evaluate_corpus, load_corpus, parse_corpus, render_report, write_atomic, Averaging,
    EvalConfig, MetricsReport, ReportFormat,
};
use oowm_core::grpo::{group_advantages, grpo_loss, PolicyRatioSample, RewardGroup};
use oowm_core::parser::{check_markers, parse_activity, parse_class, ParseMode};
use oowm_core::reward::{
    compute_reward, Paradigm, RewardBreakdown, RewardError, RewardOptions, RewardRequest,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{Command, FormatArg, KindArg, ParadigmArg};
use crate::config::RunConfig;
use crate::error::CliError;

pub fn dispatch(command: Command, config: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::Parse { kind, file, out } => parse(kind, &file, out.as_deref(), config),
        Command::Validate { file, out } => validate(&file, out.as_deref(), config),
        Command::Reward {
            paradigm,
            explain,
            input,
            output,
        } => reward(paradigm, explain, &input, output.as_deref(), config),
        Command::Advantage { input, out } => advantage(&input, out.as_deref(), config),
        Command::GrpoLoss { input, out } => loss(&input, out.as_deref(), config),
        Command::Evaluate {
            format,
            macro_average,
            corpus,
            out,
        } => evaluate(format, macro_average, &corpus, out.as_deref(), config),
        Command::Report { format, input, out } => report(format, &input, out.as_deref()),
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    let read_error = |source| CliError::Read {
        path: path.to_path_buf(),
        source,
    };
    if path == Path::new("-") {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text).map_err(read_error)?;
        Ok(text)
    } else {
        fs::read_to_string(path).map_err(read_error)
    }
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, contents.as_bytes()).map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => io::stdout()
            .lock()
            .write_all(contents.as_bytes())
            .map_err(|source| CliError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    text
}

fn diagnostic(value: serde_json::Value) {
    eprintln!("{value}");
}

/// Non-blank lines with their 1-based numbers.
fn jsonl_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_line<T: for<'de> Deserialize<'de>>(line: usize, text: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Input {
        kind: "schema_error",
        line,
        message: e.to_string(),
    })
}

fn parse(
    kind: KindArg,
    file: &Path,
    out: Option<&Path>,
    config: &RunConfig,
) -> Result<(), CliError> {
    let source = read_input(file)?;
    let located = |source| CliError::Parse {
        path: file.to_path_buf(),
        source,
    };
    let (ast, warnings) = match kind {
        KindArg::Activity => {
            let parsed = parse_activity(&source, config.parse_mode).map_err(located)?;
            (serde_json::to_value(&parsed.diagram), parsed.warnings)
        }
        KindArg::Class => {
            let parsed = parse_class(&source, config.parse_mode).map_err(located)?;
            (serde_json::to_value(&parsed.diagram), parsed.warnings)
        }
    };
    for warning in warnings {
        diagnostic(json!({ "warning": warning }));
    }
    emit(out, &pretty(&ast.expect("tree serializes")))
}

#[derive(Deserialize)]
struct OutputLine {
    #[serde(default)]
    id: Option<String>,
    prediction: String,
}

#[derive(Serialize)]
struct RecordDefects {
    line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    defects: Vec<String>,
}

#[derive(Serialize)]
struct ValidationReport {
    records: usize,
    well_formed: usize,
    valid_diagram: usize,
    histogram: BTreeMap<String, usize>,
    per_record: Vec<RecordDefects>,
    rejects: Vec<serde_json::Value>,
}

/// The diagram check a prediction would face in the reward cascade.
fn diagram_defect(answer: &str, mode: ParseMode) -> Option<String> {
    if !check_markers(answer) {
        return Some("uml_syntax".into());
    }
    parse_activity(answer, mode)
        .err()
        .map(|e| format!("uml_syntax:{}", e.kind))
}

fn validate(file: &Path, out: Option<&Path>, config: &RunConfig) -> Result<(), CliError> {
    let text = read_input(file)?;
    let mut report = ValidationReport {
        records: 0,
        well_formed: 0,
        valid_diagram: 0,
        histogram: Defect::ALL
            .iter()
            .map(|d| (d.as_str().to_string(), 0))
            .collect(),
        per_record: Vec::new(),
        rejects: Vec::new(),
    };
    report.histogram.insert("uml_syntax".into(), 0);
    for (line, raw) in jsonl_lines(&text) {
        let record: OutputLine = match parse_line(line, raw) {
            Ok(r) => r,
            Err(e) => {
                report
                    .rejects
                    .push(json!({ "line": line, "message": e.to_string() }));
                continue;
            }
        };
        report.records += 1;
        let envelope = split_envelope_with(&record.prediction, config.envelope);
        let mut defects: Vec<String> = envelope
            .defects
            .iter()
            .map(|d| d.as_str().to_string())
            .collect();
        report.well_formed += usize::from(envelope.well_formed);
        match diagram_defect(envelope.answer_text(), config.parse_mode) {
            Some(defect) => defects.push(defect),
            None => report.valid_diagram += 1,
        }
        for defect in &defects {
            let bucket = defect.split(':').next().unwrap_or(defect);
            *report.histogram.entry(bucket.to_string()).or_default() += 1;
        }
        report.per_record.push(RecordDefects {
            line,
            id: record.id,
            defects,
        });
    }
    emit(out, &pretty(&report))
}

#[derive(Deserialize)]
struct RewardLine {
    #[serde(default)]
    id: Option<String>,
    prediction: String,
    reference: String,
    #[serde(default)]
    paradigm: Option<String>,
}

#[derive(Serialize)]
struct RewardOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(flatten)]
    breakdown: RewardBreakdown,
}

fn reward(
    paradigm: ParadigmArg,
    explain: bool,
    input: &Path,
    output: Option<&Path>,
    config: &RunConfig,
) -> Result<(), CliError> {
    let text = read_input(input)?;
    let provider = config.provider();
    let options = RewardOptions {
        envelope: config.envelope,
        collect: config.collect,
        explain,
    };
    let default_paradigm = match paradigm {
        ParadigmArg::Oowm => Paradigm::Oowm,
        ParadigmArg::Text => Paradigm::Text,
    };
    let (mut lines, mut rejected, mut total) = (String::new(), 0, 0);
    for (line, raw) in jsonl_lines(&text) {
        total += 1;
        let record: RewardLine = match parse_line(line, raw) {
            Ok(r) => r,
            Err(e) => {
                rejected += 1;
                diagnostic(e.to_json());
                continue;
            }
        };
        let paradigm = match record.paradigm.as_deref().map(str::parse::<Paradigm>) {
            None => default_paradigm,
            Some(Ok(p)) => p,
            Some(Err(message)) => {
                rejected += 1;
                diagnostic(
                    CliError::Input {
                        kind: "invalid_paradigm",
                        line,
                        message,
                    }
                    .to_json(),
                );
                continue;
            }
        };
        let request = RewardRequest {
            prediction_raw: record.prediction,
            reference: record.reference,
            paradigm,
        };
        match compute_reward(&request, provider.as_ref(), options) {
            Ok(breakdown) => {
                let row = RewardOutput {
                    id: record.id,
                    breakdown,
                };
                lines.push_str(&serde_json::to_string(&row).expect("breakdown serializes"));
                lines.push('\n');
            }
            Err(RewardError::Embedding(source)) => {
                return Err(CliError::Embedding { line, source })
            }
            Err(e) => {
                rejected += 1;
                diagnostic(
                    CliError::Input {
                        kind: e.kind(),
                        line,
                        message: e.to_string(),
                    }
                    .to_json(),
                );
            }
        }
    }
    emit(output, &lines)?;
    if rejected > 0 {
        return Err(CliError::Rejected {
            count: rejected,
            total,
        });
    }
    Ok(())
}

#[derive(Deserialize)]
struct GroupLine {
    group_id: String,
    rewards: Vec<f64>,
    #[serde(default)]
    epsilon: Option<f64>,
}

fn advantage(input: &Path, out: Option<&Path>, config: &RunConfig) -> Result<(), CliError> {
    let text = read_input(input)?;
    let mut lines = String::new();
    for (line, raw) in jsonl_lines(&text) {
        let group: GroupLine = parse_line(line, raw)?;
        let batch = group_advantages(&RewardGroup {
            group_id: group.group_id,
            rewards: group.rewards,
            epsilon: group.epsilon.unwrap_or(config.epsilon),
        })
        .map_err(|source| CliError::Grpo {
            line: Some(line),
            source,
        })?;
        lines.push_str(&serde_json::to_string(&batch).expect("batch serializes"));
        lines.push('\n');
    }
    emit(out, &lines)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SampleLine {
    Ratio {
        ratio: f64,
        advantage: f64,
    },
    LogProbs {
        log_prob: f64,
        old_log_prob: f64,
        advantage: f64,
    },
}

fn loss(input: &Path, out: Option<&Path>, config: &RunConfig) -> Result<(), CliError> {
    let text = read_input(input)?;
    let mut samples = Vec::new();
    for (line, raw) in jsonl_lines(&text) {
        let sample = match parse_line::<SampleLine>(line, raw)? {
            SampleLine::Ratio { ratio, advantage } => PolicyRatioSample { ratio, advantage },
            SampleLine::LogProbs {
                log_prob,
                old_log_prob,
                advantage,
            } => PolicyRatioSample::from_log_probs(log_prob, old_log_prob, advantage),
        };
        samples.push((line, sample));
    }
    // Validate per sample first so errors point at a line.
    for (line, sample) in &samples {
        grpo_loss(std::slice::from_ref(sample), config.clip_eps).map_err(|source| {
            CliError::Grpo {
                line: Some(*line),
                source,
            }
        })?;
    }
    let samples: Vec<PolicyRatioSample> = samples.into_iter().map(|(_, s)| s).collect();
    let value = grpo_loss(&samples, config.clip_eps)
        .map_err(|source| CliError::Grpo { line: None, source })?;
    emit(
        out,
        &pretty(&json!({ "loss": value, "samples": samples.len(), "clip_eps": config.clip_eps })),
    )
}

fn format_of(format: FormatArg) -> ReportFormat {
    match format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Markdown => ReportFormat::Markdown,
    }
}

fn evaluate(
    format: FormatArg,
    macro_average: bool,
    corpus: &Path,
    out: Option<&Path>,
    config: &RunConfig,
) -> Result<(), CliError> {
    let corpus = if corpus == Path::new("-") {
        parse_corpus(&read_input(corpus)?)?
    } else {
        load_corpus(corpus)?
    };
    for reject in &corpus.rejects {
        diagnostic(json!({ "reject": reject }));
    }
    for issue in corpus.lint() {
        diagnostic(json!({ "lint": issue }));
    }
    let provider = config.provider();
    let eval_config = EvalConfig {
        threshold: config.threshold,
        collect: config.collect,
        envelope: config.envelope,
    };
    let evaluations = evaluate_corpus(
        &corpus.records,
        provider.as_ref(),
        &eval_config,
        config.parallelism,
    )?;
    let averaging = if macro_average {
        Averaging::Macro
    } else {
        Averaging::Micro
    };
    let report = aggregate(&evaluations, config.threshold, averaging);
    emit(out, &render_report(&report, format_of(format)))
}

fn report(format: FormatArg, input: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = read_input(input)?;
    let report: MetricsReport = serde_json::from_str(&text).map_err(|e| CliError::Input {
        kind: "schema_error",
        line: e.line(),
        message: e.to_string(),
    })?;
    emit(out, &render_report(&report, format_of(format)))
}
