//! Reference implementations written without reusing library logic.

use oowm_core::embedding::{cosine, HashingEmbedder};
use oowm_core::envelope::split_envelope;
use oowm_core::eval::EvalRecord;
use oowm_core::parser::{check_markers, parse_activity, ParseMode};
use oowm_core::reward::{reference_payload, Paradigm};
use oowm_core::{ActivityDiagram, CanonicalKey};

/// Repeated argmax: scan the whole table for the best free cell, row-major,
/// keeping the first cell seen on ties.
pub fn naive_greedy(rows: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let mut row_free = vec![true; n];
    let mut col_free = vec![true; m];
    let mut out = Vec::new();
    for _ in 0..n.min(m) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            for j in 0..m {
                if !row_free[i] || !col_free[j] {
                    continue;
                }
                if best.is_none_or(|(_, _, b)| rows[i][j] > b) {
                    best = Some((i, j, rows[i][j]));
                }
            }
        }
        let (i, j, s) = best.unwrap();
        row_free[i] = false;
        col_free[j] = false;
        out.push((i, j, s));
    }
    out
}

/// Maximum total weight over all matchings of size min(n, m).
pub fn brute_force_optimum(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return 0.0;
    }
    type Weight<'a> = Box<dyn Fn(usize, usize) -> f64 + 'a>;
    let (short, long, weight): (usize, usize, Weight) = if n <= m {
        (n, m, Box::new(|a, b| rows[a][b]))
    } else {
        (m, n, Box::new(|a, b| rows[b][a]))
    };
    fn go(k: usize, short: usize, used: &mut Vec<bool>, w: &dyn Fn(usize, usize) -> f64) -> f64 {
        if k == short {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(w(k, j) + go(k + 1, short, used, w));
                used[j] = false;
            }
        }
        best
    }
    go(0, short, &mut vec![false; long], &*weight)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Recount {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub pred_nodes: usize,
    pub ref_nodes: usize,
}

const SCORED: [CanonicalKey; 3] = [
    CanonicalKey::MessyAreas,
    CanonicalKey::PriorityOrder,
    CanonicalKey::SpecificSteps,
];

fn diagram_or_empty(source: &str) -> ActivityDiagram {
    if !check_markers(source) {
        return ActivityDiagram::default();
    }
    parse_activity(source, ParseMode::Lenient)
        .map(|p| p.diagram)
        .unwrap_or_default()
}

/// Classifies one record from scratch: embed each partition's node texts,
/// align with [`naive_greedy`], then apply the verdict rules directly.
pub fn recount_record(record: &EvalRecord, threshold: f64) -> (Recount, Vec<f64>) {
    let embedder = HashingEmbedder::default();
    let pred_source = match record.paradigm {
        Paradigm::Oowm => split_envelope(&record.prediction)
            .answer
            .unwrap_or_default(),
        Paradigm::Text => record.prediction_structured.clone().unwrap(),
    };
    let pred = diagram_or_empty(&pred_source);
    let reference = diagram_or_empty(reference_payload(&record.reference));
    let mut count = Recount::default();
    let mut sims = Vec::new();
    for key in SCORED {
        let p: Vec<String> = pred
            .collect_action_nodes(&key)
            .into_iter()
            .map(|a| a.text)
            .collect();
        let r: Vec<String> = reference
            .collect_action_nodes(&key)
            .into_iter()
            .map(|a| a.text)
            .collect();
        count.pred_nodes += p.len();
        count.ref_nodes += r.len();
        let embed =
            |texts: &[String]| -> Vec<_> { texts.iter().map(|t| embedder.embed(t)).collect() };
        let (pv, rv) = (embed(&p), embed(&r));
        let rows: Vec<Vec<f64>> = pv
            .iter()
            .map(|a| rv.iter().map(|b| cosine(a, b).unwrap()).collect())
            .collect();
        let matched = naive_greedy(&rows);
        for &(_, _, s) in &matched {
            sims.push(s);
            if s >= threshold {
                count.tp += 1;
            } else {
                count.fp += 1;
                count.fn_ += 1;
            }
        }
        count.fp += p.len() - matched.len();
        count.fn_ += r.len() - matched.len();
    }
    (count, sims)
}

/// Pooled precision, recall and F1 from raw counts.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}
