use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::adapter::similarity_matrix;
use crate::error::{Error, Result};
use crate::store::EmbeddingMatrix;

/// How candidates scoring exactly as high as the ground truth are counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieRule {
    /// Ties do not push the ground truth down.
    #[default]
    Optimistic,
    /// Every tie ranks ahead of the ground truth.
    Pessimistic,
}

/// 1-based rank of each pair's ground-truth partner, per query direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankResult {
    pub left_to_right: Vec<usize>,
    pub right_to_left: Vec<usize>,
}

impl RankResult {
    pub fn len(&self) -> usize {
        self.left_to_right.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left_to_right.is_empty()
    }

    /// Best rank over the two directions, per pair.
    pub fn best_ranks(&self) -> impl Iterator<Item = usize> + '_ {
        self.left_to_right
            .iter()
            .zip(&self.right_to_left)
            .map(|(&a, &b)| a.min(b))
    }
}

/// Ranks from an `n × n` score matrix where `scores[i][j]` compares left `i`
/// with right `j`. Rows are left queries, columns right queries.
pub fn rank_from_similarity(scores: ArrayView2<'_, f64>, tie: TieRule) -> RankResult {
    let n = scores.nrows();
    assert_eq!(n, scores.ncols(), "score matrix must be square");
    let ahead = |candidate: f64, truth: f64| match tie {
        TieRule::Optimistic => candidate > truth,
        TieRule::Pessimistic => candidate >= truth,
    };
    let mut left_to_right = vec![1; n];
    let mut right_to_left = vec![1; n];
    for i in 0..n {
        let truth = scores[[i, i]];
        for j in 0..n {
            if j == i {
                continue;
            }
            if ahead(scores[[i, j]], truth) {
                left_to_right[i] += 1;
            }
            if ahead(scores[[j, i]], truth) {
                right_to_left[i] += 1;
            }
        }
    }
    RankResult {
        left_to_right,
        right_to_left,
    }
}

/// Cosine-similarity ranking of every left query among all rights, and back.
pub fn rank_pairs(left: &EmbeddingMatrix, right: &EmbeddingMatrix) -> Result<RankResult> {
    rank_pairs_with(left, right, TieRule::Optimistic)
}

pub fn rank_pairs_with(
    left: &EmbeddingMatrix,
    right: &EmbeddingMatrix,
    tie: TieRule,
) -> Result<RankResult> {
    if left.n_rows() != right.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: left.n_rows(),
            actual: right.n_rows(),
        });
    }
    let s = similarity_matrix(left.view(), right.view())?;
    Ok(rank_from_similarity(s.view(), tie))
}

/// Fraction of pairs found within the top `k` in at least one direction.
pub fn asymmetric_recall(ranks: &RankResult, k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    let hits = ranks.best_ranks().filter(|&r| r <= k).count();
    hits as f64 / ranks.len() as f64
}

pub fn recall_curve(ranks: &RankResult, ks: &[usize]) -> Result<Vec<(usize, f64)>> {
    validate_ks(ks)?;
    Ok(ks
        .iter()
        .map(|&k| (k, asymmetric_recall(ranks, k)))
        .collect())
}

pub(crate) fn validate_ks(ks: &[usize]) -> Result<()> {
    if ks.is_empty() || ks[0] == 0 || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!(
            "rank cutoffs must be positive and strictly ascending, got {ks:?}"
        )));
    }
    Ok(())
}
