//! Pairwise clustering evaluation, plus the k-means baseline and z-scoring.
//!
//! A clustering is scored against a reference relation on unordered item
//! pairs: same class, or adjacent in a graph. Each flat clustering yields a
//! matching matrix (pair counts), hence one `(FPR, TPR)` point; the cuts of
//! a hierarchy trace an ROC curve whose trapezoidal area is the AUC.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::{ClusterLabels, Dendrogram};
use crate::kernels::{Dataset, Graph};
use crate::{par, rng};

/// Reference relation: which item pairs count as positive.
#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    /// Pairs sharing a class id are positive.
    Classes(Vec<usize>),
    /// Pairs joined by an edge are positive.
    Graph(Graph),
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

impl Reference {
    pub fn len(&self) -> usize {
        match self {
            Reference::Classes(c) => c.len(),
            Reference::Graph(g) => g.n_vertices(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        match self {
            Reference::Classes(c) => c[i] == c[j],
            Reference::Graph(g) => g.is_adjacent(i, j),
        }
    }

    pub fn positive_pairs(&self) -> u64 {
        match self {
            Reference::Classes(c) => {
                let mut counts: HashMap<usize, u64> = HashMap::new();
                for &x in c {
                    *counts.entry(x).or_default() += 1;
                }
                counts.values().map(|&n| choose2(n)).sum()
            }
            Reference::Graph(g) => g.n_edges() as u64,
        }
    }

    /// Relation induced on the items `ids` (item `ids[k]` becomes `k`).
    pub fn restrict(&self, ids: &[usize]) -> Result<Reference> {
        let n = self.len();
        if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, dim: n });
        }
        Ok(match self {
            Reference::Classes(c) => Reference::Classes(ids.iter().map(|&i| c[i]).collect()),
            Reference::Graph(g) => {
                let mut position = vec![usize::MAX; n];
                for (k, &i) in ids.iter().enumerate() {
                    position[i] = k;
                }
                let edges = g
                    .edges()
                    .filter(|&(u, v)| position[u] != usize::MAX && position[v] != usize::MAX)
                    .map(|(u, v)| (position[u], position[v]));
                Reference::Graph(Graph::from_edges(ids.len(), edges)?)
            }
        })
    }
}

/// Pair counts of a clustering against a reference relation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MatchingMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn rate(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MatchingMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> f64 {
        rate(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        rate(self.fp, self.fp + self.tn)
    }

    fn from_counts(n: usize, positives: u64, co_clustered: u64, tp: u64) -> Self {
        let total = choose2(n as u64);
        let fp = co_clustered - tp;
        let fn_ = positives - tp;
        MatchingMatrix {
            tp,
            fp,
            fn_,
            tn: total - tp - fp - fn_,
        }
    }
}

pub fn matching_matrix(pred: &ClusterLabels, reference: &Reference) -> Result<MatchingMatrix> {
    let n = pred.len();
    if reference.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: reference.len(),
        });
    }
    let co: u64 = pred.sizes().iter().map(|&s| choose2(s as u64)).sum();
    let tp = match reference {
        Reference::Classes(c) => {
            let mut table: HashMap<(usize, usize), u64> = HashMap::new();
            for (i, &class) in c.iter().enumerate() {
                *table.entry((pred.get(i), class)).or_default() += 1;
            }
            table.values().map(|&m| choose2(m)).sum()
        }
        Reference::Graph(g) => g
            .edges()
            .filter(|&(u, v)| pred.get(u) == pred.get(v))
            .count() as u64,
    };
    Ok(MatchingMatrix::from_counts(
        n,
        reference.positive_pairs(),
        co,
        tp,
    ))
}

/// Rand-style agreement: fraction of item pairs on which two clusterings agree
/// about co-membership.
pub fn pair_agreement(pred: &ClusterLabels, truth: &ClusterLabels) -> Result<f64> {
    let m = matching_matrix(pred, &Reference::Classes(truth.assignments().to_vec()))?;
    Ok(rate(m.tp + m.tn, m.total()))
}

/// ROC points sorted by `(fpr, tpr)`, always including `(0, 0)` and `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocCurve {
    points: Vec<(f64, f64)>,
}

impl RocCurve {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        for &(f, t) in &points {
            if !((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&t)) {
                return Err(Error::InvalidParameter(format!(
                    "ROC point ({f}, {t}) outside the unit square"
                )));
            }
        }
        points.push((0.0, 0.0));
        points.push((1.0, 1.0));
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        points.dedup();
        Ok(RocCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn auc(&self) -> f64 {
        auc(self)
    }

    /// `fpr,tpr` rows with ten significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for &(f, t) in &self.points {
            out.push_str(&format!("{},{}\n", sig10(f), sig10(t)));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            points: &'a [(f64, f64)],
            auc: f64,
        }
        Ok(serde_json::to_string(&Out {
            points: &self.points,
            auc: self.auc(),
        })?)
    }
}

/// Fixed-point decimal with ten significant digits.
pub fn sig10(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (9 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Trapezoidal area under the curve over `fpr ∈ [0, 1]`.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Reference aligned with the tree's leaves.
fn leaf_reference(tree: &Dendrogram, reference: &Reference) -> Result<Reference> {
    match tree.leaf_ids() {
        Some(ids) => reference.restrict(ids),
        None if reference.len() == tree.n_leaves() => Ok(reference.clone()),
        None => Err(Error::DimensionMismatch {
            expected: tree.n_leaves(),
            found: reference.len(),
        }),
    }
}

/// One matching matrix per cut, from `n_leaves` clusters down to `n_roots`.
///
/// Counts are updated per merge: joining clusters of sizes `a` and `b` adds
/// `a·b` co-clustered pairs, of which the positives are counted by walking
/// the smaller cluster.
pub fn hierarchy_matching_matrices(
    tree: &Dendrogram,
    reference: &Reference,
) -> Result<Vec<MatchingMatrix>> {
    let reference = leaf_reference(tree, reference)?;
    let n = tree.n_leaves();
    let positives = reference.positive_pairs();
    // clusters live in storage slots; `slot_of` maps a live label to its slot
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut owner: Vec<usize> = (0..n).collect();
    let mut slot_of: Vec<usize> = (0..n).collect();
    let mut class_counts: Vec<HashMap<usize, u64>> = match &reference {
        Reference::Classes(c) => c.iter().map(|&x| HashMap::from([(x, 1u64)])).collect(),
        Reference::Graph(_) => Vec::new(),
    };
    let (mut co, mut tp) = (0u64, 0u64);
    let mut out = Vec::with_capacity(tree.merges().len() + 1);
    out.push(MatchingMatrix::from_counts(n, positives, 0, 0));

    for m in tree.merges() {
        let (a, b) = (slot_of[m.removed], slot_of[m.kept]);
        let (small, large) = if members[a].len() <= members[b].len() {
            (a, b)
        } else {
            (b, a)
        };
        co += (members[small].len() * members[large].len()) as u64;
        match &reference {
            Reference::Classes(_) => {
                let small_counts = std::mem::take(&mut class_counts[small]);
                let large_counts = &mut class_counts[large];
                for (class, c) in small_counts {
                    let entry = large_counts.entry(class).or_default();
                    tp += c * *entry;
                    *entry += c;
                }
            }
            Reference::Graph(g) => {
                for &u in &members[small] {
                    tp += g
                        .neighbors(u)
                        .iter()
                        .filter(|&&w| owner[w] == large)
                        .count() as u64;
                }
            }
        }
        let moved = std::mem::take(&mut members[small]);
        for &u in &moved {
            owner[u] = large;
        }
        members[large].extend(moved);
        slot_of[m.kept] = large;
        out.push(MatchingMatrix::from_counts(n, positives, co, tp));
    }
    Ok(out)
}

pub fn roc_from_hierarchy(tree: &Dendrogram, reference: &Reference) -> Result<RocCurve> {
    let matrices = hierarchy_matching_matrices(tree, reference)?;
    RocCurve::new(matrices.iter().map(|m| (m.fpr(), m.tpr())).collect())
}

/// ROC through the points of several flat clusterings, e.g. a k-means sweep.
pub fn roc_from_partitions(
    partitions: &[ClusterLabels],
    reference: &Reference,
) -> Result<RocCurve> {
    let points = partitions
        .iter()
        .map(|p| matching_matrix(p, reference).map(|m| (m.fpr(), m.tpr())))
        .collect::<Result<Vec<_>>>()?;
    RocCurve::new(points)
}

#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub labels: ClusterLabels,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after each centroid update.
    pub objective: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd iterations from k-means++ seeding.
pub fn kmeans(data: &Dataset, k: usize, seed: u64, max_iters: usize) -> Result<ClusterLabels> {
    Ok(kmeans_fit(data, k, seed, max_iters)?.labels)
}

pub fn kmeans_fit(data: &Dataset, k: usize, seed: u64, max_iters: usize) -> Result<KMeansFit> {
    if !data.is_complete() {
        return Err(Error::MissingData);
    }
    let n = data.n_rows();
    if k == 0 || k > n {
        return Err(Error::TooManyClusters {
            requested: k,
            available: n,
        });
    }
    let p = data.n_cols();
    let mut rng = rng::seeded(seed);

    // k-means++ seeding
    let mut centroids = vec![data.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(data.row(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = data.row(next).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), &c));
        }
        centroids.push(c);
    }

    let mut assign = vec![usize::MAX; n];
    let mut objective = Vec::new();
    for _ in 0..max_iters.max(1) {
        let next = par::map(n, |i| nearest(data.row(i), &centroids).0);
        let changed = next != assign;
        assign = next;
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, x) in sums[assign[i]].iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // re-seed at the point farthest from its own centroid
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| {
                        let da = sq_dist(data.row(a), &centroids[assign[a]]);
                        let db = sq_dist(data.row(b), &centroids[assign[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("k <= n");
                taken[far] = true;
                centroids[c] = data.row(far).to_vec();
            }
        }
        objective.push(
            (0..n)
                .map(|i| sq_dist(data.row(i), &centroids[assign[i]]))
                .sum(),
        );
    }
    Ok(KMeansFit {
        labels: ClusterLabels::from_raw(&assign),
        centroids,
        objective,
    })
}

/// Replaces missing cells with their column mean over present entries.
pub fn impute_mean(data: &Dataset) -> Result<Dataset> {
    let (n, p) = (data.n_rows(), data.n_cols());
    let mut means = vec![0.0; p];
    for (j, mean) in means.iter_mut().enumerate() {
        let present: Vec<f64> = (0..n).filter_map(|i| data.get(i, j)).collect();
        if !present.is_empty() {
            *mean = present.iter().sum::<f64>() / present.len() as f64;
        }
    }
    let values = (0..n * p)
        .map(|c| data.get(c / p, c % p).unwrap_or(means[c % p]))
        .collect();
    Dataset::new(n, p, values, vec![true; n * p])
}

/// Per-column z-scores over present entries, with the population (1/n)
/// standard deviation. Columns without spread become all zeros.
pub fn zscore_normalize(data: &Dataset) -> Result<Dataset> {
    let (n, p) = (data.n_rows(), data.n_cols());
    let mut values = data.values().to_vec();
    for j in 0..p {
        let present: Vec<usize> = (0..n).filter(|&i| data.present()[i * p + j]).collect();
        let m = present.len() as f64;
        let mean = present.iter().map(|&i| values[i * p + j]).sum::<f64>() / m;
        let var = present
            .iter()
            .map(|&i| (values[i * p + j] - mean).powi(2))
            .sum::<f64>()
            / m;
        let sd = var.sqrt();
        if present.len() < 2 || !(sd > 0.0) {
            log::warn!("column {j} has no spread; writing zeros");
            for &i in &present {
                values[i * p + j] = 0.0;
            }
            continue;
        }
        for &i in &present {
            values[i * p + j] = (values[i * p + j] - mean) / sd;
        }
    }
    Dataset::new(n, p, values, data.present().to_vec())
}
