//! `<think>` / `<answer>` encapsulation of a raw model output.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Defect {
    MissingThink,
    MissingAnswer,
    UnclosedTag,
    InterleavedTags,
    DuplicateTag,
}

impl Defect {
    pub const ALL: [Defect; 5] = [
        Defect::MissingThink,
        Defect::MissingAnswer,
        Defect::UnclosedTag,
        Defect::InterleavedTags,
        Defect::DuplicateTag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Defect::MissingThink => "missing_think",
            Defect::MissingAnswer => "missing_answer",
            Defect::UnclosedTag => "unclosed_tag",
            Defect::InterleavedTags => "interleaved_tags",
            Defect::DuplicateTag => "duplicate_tag",
        }
    }
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvelopeOptions {
    /// Treat `<answer>` before `<think>` as interleaved. On by default; the
    /// reasoning trace is produced before the plan.
    pub require_think_first: bool,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions {
            require_think_first: true,
        }
    }
}

/// The split of a raw output into its two payloads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub think: Option<String>,
    pub answer: Option<String>,
    pub well_formed: bool,
    /// Sorted, without repeats.
    pub defects: Vec<Defect>,
}

impl Envelope {
    /// The answer payload, or the empty string when absent.
    pub fn answer_text(&self) -> &str {
        self.answer.as_deref().unwrap_or("")
    }
}

struct Span {
    start: usize,
    end: usize,
    payload: String,
}

enum Scan {
    Missing,
    Unclosed,
    Closed(Span),
}

fn scan(raw: &str, tag: &str) -> (Scan, bool) {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let duplicate = raw.matches(&open).count() > 1 || raw.matches(&close).count() > 1;
    let Some(start) = raw.find(&open) else {
        return (Scan::Missing, duplicate);
    };
    let content_start = start + open.len();
    let scan = match raw[content_start..].find(&close) {
        None => Scan::Unclosed,
        Some(offset) => Scan::Closed(Span {
            start,
            end: content_start + offset + close.len(),
            payload: raw[content_start..content_start + offset]
                .trim()
                .to_string(),
        }),
    };
    (scan, duplicate)
}

/// Extracts the first `<think>…</think>` and `<answer>…</answer>` spans.
/// Text outside the tags is ignored; problems are recorded as defects.
pub fn split_envelope(raw: &str) -> Envelope {
    split_envelope_with(raw, EnvelopeOptions::default())
}

pub fn split_envelope_with(raw: &str, options: EnvelopeOptions) -> Envelope {
    let mut defects = Vec::new();
    let (think, think_dup) = scan(raw, "think");
    let (answer, answer_dup) = scan(raw, "answer");

    for (scan, missing) in [
        (&think, Defect::MissingThink),
        (&answer, Defect::MissingAnswer),
    ] {
        match scan {
            Scan::Missing => defects.push(missing),
            Scan::Unclosed => defects.push(Defect::UnclosedTag),
            Scan::Closed(_) => {}
        }
    }
    if let (Scan::Closed(t), Scan::Closed(a)) = (&think, &answer) {
        let overlap = t.start < a.end && a.start < t.end;
        let reversed = a.end <= t.start;
        if overlap || (reversed && options.require_think_first) {
            defects.push(Defect::InterleavedTags);
        }
    }
    if think_dup || answer_dup {
        defects.push(Defect::DuplicateTag);
    }
    defects.sort();
    defects.dedup();

    let payload = |scan: Scan| match scan {
        Scan::Closed(span) => Some(span.payload),
        _ => None,
    };
    Envelope {
        think: payload(think),
        answer: payload(answer),
        well_formed: defects.is_empty(),
        defects,
    }
}

/// 1.0 iff the envelope is well formed, else 0.0.
pub fn structural_reward(envelope: &Envelope) -> f64 {
    if envelope.well_formed {
        1.0
    } else {
        0.0
    }
}
