//! Independent reference implementations used by the integration tests and
//! the acceptance suite. Plain loops over `Vec`s, nothing shared with the
//! library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

pub fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for a in 0..d {
            for b in 0..d {
                c[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    for row in &mut c {
        for v in row.iter_mut() {
            *v /= (n - 1) as f64;
        }
    }
    c
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes. Returns
/// the eigenvalues in descending order.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let d = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|p| (0..d).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        let scale: f64 = (0..d)
            .map(|p| a[p][p] * a[p][p])
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Position of `truth` after sorting all candidates by descending score,
/// with the ground truth placed first among equal scores.
fn sorted_position(scores: &[f64], truth: usize) -> usize {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&x, &y| {
        scores[y]
            .total_cmp(&scores[x])
            .then_with(|| (y == truth).cmp(&(x == truth)))
    });
    order.iter().position(|&j| j == truth).unwrap() + 1
}

/// `(left_to_right, right_to_left)` ranks from a score table by full sort.
pub fn brute_ranks(scores: &[Vec<f64>]) -> (Vec<usize>, Vec<usize>) {
    let n = scores.len();
    let l2r = (0..n).map(|i| sorted_position(&scores[i], i)).collect();
    let r2l = (0..n)
        .map(|j| {
            let column: Vec<f64> = (0..n).map(|i| scores[i][j]).collect();
            sorted_position(&column, j)
        })
        .collect();
    (l2r, r2l)
}

pub fn brute_recall(l2r: &[usize], r2l: &[usize], k: usize) -> f64 {
    let hits = l2r.iter().zip(r2l).filter(|(&a, &b)| a.min(b) <= k).count();
    hits as f64 / l2r.len() as f64
}

/// Two-sided cross-entropy of `softmax(σ·S)` against the identity, by
/// direct exponentiation.
pub fn brute_loss(s: &[Vec<f64>], sigma: f64) -> f64 {
    let n = s.len();
    let directed = |get: &dyn Fn(usize, usize) -> f64| -> f64 {
        (0..n)
            .map(|i| {
                let z: f64 = (0..n).map(|j| (sigma * get(i, j)).exp()).sum();
                -((sigma * get(i, i)).exp() / z).ln()
            })
            .sum::<f64>()
            / n as f64
    };
    (directed(&|i, j| s[i][j]) + directed(&|i, j| s[j][i])) / 2.0
}
