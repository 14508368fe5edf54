//! Ranking, Asymmetric Recall, recall curves, run aggregation and
//! bootstrap epoch selection.

mod bootstrap;
pub(crate) mod rank;
pub mod report;
mod stats;

pub use bootstrap::{select_epoch, select_epoch_from_scores};
pub use rank::{
    asymmetric_recall, rank_from_similarity, rank_pairs, rank_pairs_with as rank_pairs_with_tie,
    recall_curve, RankResult, TieRule,
};
pub use stats::{mean, sample_std, Summary};
