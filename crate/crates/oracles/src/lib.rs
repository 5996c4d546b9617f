//! Slow, obviously-correct reference computations for tests.
//!
//! Nothing here depends on the library under test: matrices are plain
//! `Vec<Vec<f64>>` and randomness comes from its own seeded generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub type Dense = Vec<Vec<f64>>;
pub type OracleRng = ChaCha20Rng;

pub fn rng(seed: u64) -> OracleRng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..m {
            let aik = a[i][k];
            for j in 0..p {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn identity(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn trace(a: &Dense) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

pub fn frobenius(a: &Dense) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn gaussian_matrix(rng: &mut OracleRng, rows: usize, cols: usize) -> Dense {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// Symmetric matrix with standard normal entries.
pub fn random_symmetric(rng: &mut OracleRng, p: usize) -> Dense {
    let mut a = gaussian_matrix(rng, p, p);
    for i in 0..p {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
    }
    a
}

/// `GᵀG` for a Gaussian `G` with `rank` rows: positive semi-definite.
pub fn random_spsd(rng: &mut OracleRng, p: usize, rank: usize) -> Dense {
    let g = gaussian_matrix(rng, rank, p);
    matmul(&transpose(&g), &g)
}

/// Treelet loop on a dense matrix: full pair scan with the score
/// `sqrt(a_ij² / (a_ii a_jj)) + λ|a_ij|` (ties to the smallest pair), the
/// smallest Jacobi rotation zeroing the pair applied by explicit matrix
/// products, and the index left with the smaller diagonal retired.
/// Returns `(retired, kept)` per step.
pub fn reference_merges(a0: &Dense, lambda: f64, stop_tol: f64) -> Vec<(usize, usize)> {
    let p = a0.len();
    let mut a = a0.clone();
    let mut active: Vec<usize> = (0..p).collect();
    let mut out = Vec::new();
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let (i, j) = (active[x].min(active[y]), active[x].max(active[y]));
                let prod = a[i][i] * a[j][j];
                let corr = if prod > 1e-300 {
                    (a[i][j] * a[i][j] / prod).sqrt()
                } else {
                    0.0
                };
                let score = corr + lambda * a[i][j].abs();
                let better = match best {
                    None => true,
                    Some((s, bi, bj)) => score > s || (score == s && (i, j) < (bi, bj)),
                };
                if better {
                    best = Some((score, i, j));
                }
            }
        }
        let (score, i, j) = best.unwrap();
        if score < stop_tol {
            break;
        }
        // larger angles would swap the contents of the two slots
        let theta = 0.5 * (2.0 * a[i][j] / (a[i][i] - a[j][j])).atan();
        let mut g = identity(p);
        g[i][i] = theta.cos();
        g[j][j] = theta.cos();
        g[i][j] = -theta.sin();
        g[j][i] = theta.sin();
        a = matmul(&matmul(&transpose(&g), &a), &g);
        let (retired, kept) = if a[j][j] < a[i][i] { (j, i) } else { (i, j) };
        active.retain(|&v| v != retired);
        out.push((retired, kept));
    }
    out
}

/// Labels after applying `(removed, kept)` merges by repeated relabelling.
pub fn labels_after(n: usize, merges: &[(usize, usize)]) -> Vec<usize> {
    let mut label: Vec<usize> = (0..n).collect();
    for &(removed, kept) in merges {
        let (from, to) = (label[removed], label[kept]);
        for l in label.iter_mut() {
            if *l == from {
                *l = to;
            }
        }
    }
    label
}

/// Random valid merge sequence over `n` leaves: each step retires a live
/// leaf into another live one. Between 0 and `n − 1` merges.
pub fn random_merges(rng: &mut OracleRng, n: usize) -> Vec<(usize, usize)> {
    let mut live: Vec<usize> = (0..n).collect();
    let steps = if n > 1 { rng.random_range(0..n) } else { 0 };
    (0..steps)
        .map(|_| {
            let a = live.swap_remove(rng.random_range(0..live.len()));
            (a, live[rng.random_range(0..live.len())])
        })
        .collect()
}

/// `[tp, fp, tn, fn]` by enumerating every unordered pair.
pub fn brute_counts(labels: &[usize], positive: impl Fn(usize, usize) -> bool) -> [u64; 4] {
    let mut c = [0u64; 4];
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let same = labels[i] == labels[j];
            c[match (positive(i, j), same) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            }] += 1;
        }
    }
    c
}

/// Fraction of pairs on which two labelings agree about co-membership.
pub fn agreement(a: &[usize], b: &[usize]) -> f64 {
    let c = brute_counts(a, |i, j| b[i] == b[j]);
    (c[0] + c[2]) as f64 / c.iter().sum::<u64>() as f64
}

pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Single linkage: join the closest pair of components until `k` remain.
pub fn single_linkage(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = points.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            edges.push((squared_distance(&points[i], &points[j]), i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut label: Vec<usize> = (0..n).collect();
    let mut components = n;
    for (_, i, j) in edges {
        if components <= k {
            break;
        }
        let (from, to) = (label[i], label[j]);
        if from != to {
            label
                .iter_mut()
                .filter(|l| **l == from)
                .for_each(|l| *l = to);
            components -= 1;
        }
    }
    label
}

/// Trapezoid area of a polyline through points sorted by x.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_loop_on_two_blocks() {
        let a = vec![
            vec![1.0, 0.9, 0.0, 0.0],
            vec![0.9, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.8],
            vec![0.0, 0.0, 0.8, 1.0],
        ];
        let m = reference_merges(&a, 0.0, 1e-10);
        assert_eq!(m.len(), 2);
        assert_eq!(labels_after(4, &m)[0], labels_after(4, &m)[1]);
        assert_ne!(labels_after(4, &m)[0], labels_after(4, &m)[2]);
    }

    #[test]
    fn counts_and_agreement() {
        assert_eq!(brute_counts(&[0, 0, 1], |i, j| i + j == 1), [1, 0, 2, 0]);
        assert_eq!(agreement(&[0, 0, 1], &[5, 5, 2]), 1.0);
        assert!((trapezoid(&[(0.0, 0.0), (0.2, 0.8), (1.0, 1.0)]) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn single_linkage_splits_far_groups() {
        let pts = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.2]];
        assert_eq!(agreement(&single_linkage(&pts, 2), &[0, 0, 1, 1]), 1.0);
    }
}
