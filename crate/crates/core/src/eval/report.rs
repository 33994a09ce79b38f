use std::fmt::{self, Write as _};
use std::fs;
use std::io::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Counts, MetricsReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "markdown",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" | "markdown-table" => Ok(ReportFormat::Markdown),
            other => Err(format!(
                "unknown report format `{other}` (expected json|csv|markdown)"
            )),
        }
    }
}

const CSV_HEADER: &str = "scope,similarity,precision,recall,f1,tp,fp,fn,matched_pairs";

/// Renders a report. JSON is pretty-printed with a trailing newline; the
/// field order is fixed by the struct definition.
pub fn render_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_string_pretty(report).expect("report serializes");
            out.push('\n');
            out
        }
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn csv_row(out: &mut String, scope: &str, m: [f64; 4], counts: Counts, matched: usize) {
    let _ = writeln!(
        out,
        "{scope},{},{},{},{},{},{},{},{matched}",
        m[0], m[1], m[2], m[3], counts.tp, counts.fp, counts.fn_
    );
}

fn render_csv(report: &MetricsReport) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    if report.n_records == 0 {
        return out;
    }
    csv_row(
        &mut out,
        "overall",
        [
            report.similarity,
            report.precision,
            report.recall,
            report.f1,
        ],
        report.counts,
        report.matched_pairs,
    );
    for (key, m) in &report.per_partition {
        csv_row(
            &mut out,
            &key.to_string(),
            [m.similarity, m.precision, m.recall, m.f1],
            m.counts,
            m.matched_pairs,
        );
    }
    out
}

fn render_markdown(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| Similarity | Precision | Recall | F1 |");
    let _ = writeln!(out, "|---|---|---|---|");
    let _ = writeln!(
        out,
        "| {:.4} | {:.4} | {:.4} | {:.4} |",
        report.similarity, report.precision, report.recall, report.f1
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{} records, {} parse failures, threshold {}, {} averaging. TP={} FP={} FN={}.",
        report.n_records,
        report.n_parse_failures,
        report.threshold,
        report.averaging,
        report.counts.tp,
        report.counts.fp,
        report.counts.fn_
    );
    if !report.per_partition.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "| Partition | Similarity | Precision | Recall | F1 | TP | FP | FN |"
        );
        let _ = writeln!(out, "|---|---|---|---|---|---|---|---|");
        for (key, m) in &report.per_partition {
            let _ = writeln!(
                out,
                "| {key} | {:.4} | {:.4} | {:.4} | {:.4} | {} | {} | {} |",
                m.similarity, m.precision, m.recall, m.f1, m.counts.tp, m.counts.fp, m.counts.fn_
            );
        }
    }
    out
}

/// Writes `contents` to a temporary file beside `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> io::Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn emit_report(
    report: &MetricsReport,
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> io::Result<()> {
    write_atomic(path, render_report(report, format).as_bytes())
}
