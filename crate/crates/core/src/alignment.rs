//! Greedy similarity alignment between predicted and reference action nodes.

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, EmbedError, EmbeddingVector};

/// Row-major prediction × reference similarity table.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_embeddings(
        pred: &[EmbeddingVector],
        reference: &[EmbeddingVector],
    ) -> Result<Self, EmbedError> {
        let mut values = Vec::with_capacity(pred.len() * reference.len());
        for p in pred {
            for r in reference {
                values.push(cosine(p, r)?);
            }
        }
        Ok(SimilarityMatrix {
            rows: pred.len(),
            cols: reference.len(),
            values,
        })
    }

    /// Builds a matrix from explicit rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == cols),
            "ragged similarity rows"
        );
        SimilarityMatrix {
            rows: rows.len(),
            cols,
            values: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred_index: usize,
    pub ref_index: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    /// In selection order (non-increasing similarity).
    pub pairs: Vec<MatchedPair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_ref: Vec<usize>,
}

impl MatchSet {
    pub fn total_similarity(&self) -> f64 {
        self.pairs.iter().map(|p| p.similarity).sum()
    }
}

/// Greedy alignment over embeddings. See [`greedy_match_matrix`].
pub fn greedy_match(
    pred: &[EmbeddingVector],
    reference: &[EmbeddingVector],
) -> Result<MatchSet, EmbedError> {
    Ok(greedy_match_matrix(&SimilarityMatrix::from_embeddings(
        pred, reference,
    )?))
}

/// Repeatedly takes the highest-similarity pair whose row and column are both
/// still free, until one side runs out. Ties go to the smaller prediction
/// index, then the smaller reference index. NaN entries rank below every
/// number.
pub fn greedy_match_matrix(matrix: &SimilarityMatrix) -> MatchSet {
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut candidates: Vec<(usize, usize)> = (0..matrix.rows)
        .flat_map(|i| (0..matrix.cols).map(move |j| (i, j)))
        .collect();
    candidates.sort_by(|&(ai, aj), &(bi, bj)| {
        key(matrix.get(bi, bj))
            .total_cmp(&key(matrix.get(ai, aj)))
            .then(ai.cmp(&bi))
            .then(aj.cmp(&bj))
    });

    let target = matrix.rows.min(matrix.cols);
    let mut pred_used = vec![false; matrix.rows];
    let mut ref_used = vec![false; matrix.cols];
    let mut pairs = Vec::with_capacity(target);
    for (i, j) in candidates {
        if pairs.len() == target {
            break;
        }
        if pred_used[i] || ref_used[j] {
            continue;
        }
        pred_used[i] = true;
        ref_used[j] = true;
        pairs.push(MatchedPair {
            pred_index: i,
            ref_index: j,
            similarity: matrix.get(i, j),
        });
    }
    let free = |used: &[bool]| {
        used.iter()
            .enumerate()
            .filter(|(_, u)| !**u)
            .map(|(i, _)| i)
            .collect()
    };
    MatchSet {
        pairs,
        unmatched_pred: free(&pred_used),
        unmatched_ref: free(&ref_used),
    }
}

/// Mean of the matched similarities, each clamped to `[0, 1]`. An empty match
/// scores 0.0. Unmatched nodes do not lower the score.
pub fn partition_reward(matches: &MatchSet) -> f64 {
    if matches.pairs.is_empty() {
        return 0.0;
    }
    let sum: f64 = matches
        .pairs
        .iter()
        .map(|p| {
            if p.similarity.is_nan() {
                0.0
            } else {
                p.similarity.clamp(0.0, 1.0)
            }
        })
        .sum();
    sum / matches.pairs.len() as f64
}
