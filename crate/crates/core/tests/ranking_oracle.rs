mod common;

use ndarray::Array2;
use rand::Rng;
use simadapt::eval::{rank_from_similarity, TieRule};
use simadapt::{asymmetric_recall, rank_pairs, recall_curve, EmbeddingMatrix};

#[test]
fn rank_pairs_matches_full_sort() {
    let mut rng = common::rng(21);
    for case in 0..100 {
        let n = rng.gen_range(1..=200);
        let d = rng.gen_range(2..=24);
        let left = common::gaussian_rows(&mut rng, n, d);
        // Partners are noisy copies so ranks spread over the whole range.
        let noise = rng.gen_range(0.1..3.0);
        let mut right = common::gaussian_rows(&mut rng, n, d);
        for (r, l) in right.iter_mut().zip(&left) {
            for (x, y) in r.iter_mut().zip(l) {
                *x = y + noise * *x;
            }
        }
        let scores: Vec<Vec<f64>> = left
            .iter()
            .map(|l| right.iter().map(|r| common::cosine(l, r)).collect())
            .collect();
        let (l2r, r2l) = common::brute_ranks(&scores);

        let got = rank_pairs(
            &EmbeddingMatrix::from_rows(&left).unwrap(),
            &EmbeddingMatrix::from_rows(&right).unwrap(),
        )
        .unwrap();
        assert_eq!(got.left_to_right, l2r, "case {case}");
        assert_eq!(got.right_to_left, r2l, "case {case}");
        for k in 1..=n {
            assert_eq!(
                asymmetric_recall(&got, k),
                common::brute_recall(&l2r, &r2l, k),
                "case {case} k={k}"
            );
        }
    }
}

#[test]
fn exact_ties_follow_the_optimistic_rule() {
    let mut rng = common::rng(22);
    for _ in 0..50 {
        let n = rng.gen_range(1..=60);
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(0..4) as f64).collect())
            .collect();
        let flat: Vec<f64> = scores.iter().flatten().copied().collect();
        let got = rank_from_similarity(
            Array2::from_shape_vec((n, n), flat).unwrap().view(),
            TieRule::Optimistic,
        );
        let (l2r, r2l) = common::brute_ranks(&scores);
        assert_eq!(got.left_to_right, l2r);
        assert_eq!(got.right_to_left, r2l);
    }
}

#[test]
fn curve_is_monotone_and_complete() {
    let mut rng = common::rng(23);
    let n = 150;
    let left = EmbeddingMatrix::from_rows(&common::gaussian_rows(&mut rng, n, 8)).unwrap();
    let right = EmbeddingMatrix::from_rows(&common::gaussian_rows(&mut rng, n, 8)).unwrap();
    let ranks = rank_pairs(&left, &right).unwrap();
    let ks: Vec<usize> = (1..=n).collect();
    let curve = recall_curve(&ranks, &ks).unwrap();
    assert!(curve.windows(2).all(|w| w[0].1 <= w[1].1));
    assert_eq!(curve.last().unwrap().1, 1.0);
}
