//! Sample-then-extend clustering pipeline.
//!
//! A uniform sample is clustered with the treelet hierarchy; every item left
//! out of the sample gets the majority label of its nearest sample items
//! under the kernel-induced distance
//! `d(x, y)² = K(x, x) + K(y, y) − 2 K(x, y)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{merge_tree, ClusterLabels, Dendrogram};
use crate::kernels::{gram, KernelSpec, Observations};
use crate::par;
use crate::rng;
use crate::treelet::{
    decompose_with, DecomposeOptions, PairSearch, TreeletDecomposition, DEFAULT_STOP_TOL,
};

pub const DEFAULT_KNN_K: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KtConfig {
    pub kernel: KernelSpec,
    pub sample_size: usize,
    pub n_clusters: usize,
    pub lambda: f64,
    pub knn_k: usize,
    pub seed: u64,
    pub stop_tol: f64,
}

impl KtConfig {
    pub fn new(kernel: KernelSpec, sample_size: usize, n_clusters: usize) -> Self {
        KtConfig {
            kernel,
            sample_size,
            n_clusters,
            lambda: 0.0,
            knn_k: DEFAULT_KNN_K,
            seed: 0,
            stop_tol: DEFAULT_STOP_TOL,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        self.kernel.validate()?;
        if self.sample_size < 2 {
            return bad(format!("sample size {} is below 2", self.sample_size));
        }
        if self.sample_size > n {
            return Err(Error::SampleTooLarge {
                requested: self.sample_size,
                available: n,
            });
        }
        if self.n_clusters == 0 {
            return bad("number of clusters must be positive".into());
        }
        if self.n_clusters > self.sample_size {
            return Err(Error::TooManyClusters {
                requested: self.n_clusters,
                available: self.sample_size,
            });
        }
        if self.knn_k == 0 || self.knn_k.is_multiple_of(2) {
            return bad(format!(
                "knn k must be odd and positive, got {}",
                self.knn_k
            ));
        }
        if self.sample_size < n && self.knn_k > self.sample_size {
            return bad(format!(
                "knn k {} exceeds sample size {}",
                self.knn_k, self.sample_size
            ));
        }
        if !(self.lambda >= 0.0) || !(self.stop_tol >= 0.0) {
            return bad("lambda and stop tolerance must be non-negative".into());
        }
        Ok(())
    }
}

/// `n_s` distinct indices from `0..n`, uniformly without replacement.
///
/// Partial Fisher–Yates over the seeded ChaCha8 stream: position `i` swaps
/// with a uniform draw from `i..n`.
pub fn sample_indices(n: usize, n_s: usize, seed: u64) -> Result<Vec<usize>> {
    if n_s > n {
        return Err(Error::SampleTooLarge {
            requested: n_s,
            available: n,
        });
    }
    let mut rng = rng::seeded(seed);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..n_s {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(n_s);
    Ok(pool)
}

fn distance_from_parts(kxx: f64, kyy: f64, kxy: f64) -> f64 {
    (kxx + kyy - 2.0 * kxy).max(0.0).sqrt()
}

/// Kernel-induced distance between items `i` and `j`.
pub fn kernel_distance<O: Observations + ?Sized>(
    spec: &KernelSpec,
    data: &O,
    i: usize,
    j: usize,
) -> Result<f64> {
    Ok(distance_from_parts(
        data.kernel(spec, i, i)?,
        data.kernel(spec, j, j)?,
        data.kernel(spec, i, j)?,
    ))
}

/// Kernel-induced distance between two numeric vectors.
pub fn kernel_distance_vectors(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(distance_from_parts(
        spec.eval_vectors(x, x)?,
        spec.eval_vectors(y, y)?,
        spec.eval_vectors(x, y)?,
    ))
}

/// Assigns labels to items outside the clustered sample.
pub trait LabelExtension {
    fn extend<O: Observations + ?Sized>(
        &self,
        spec: &KernelSpec,
        data: &O,
        sample: &[usize],
        sample_labels: &[usize],
        queries: &[usize],
    ) -> Result<Vec<usize>>;
}

/// Kernelized k-nearest-neighbour majority vote.
#[derive(Clone, Copy, Debug)]
pub struct KnnExtension {
    pub k: usize,
}

impl LabelExtension for KnnExtension {
    fn extend<O: Observations + ?Sized>(
        &self,
        spec: &KernelSpec,
        data: &O,
        sample: &[usize],
        sample_labels: &[usize],
        queries: &[usize],
    ) -> Result<Vec<usize>> {
        knn_extend(spec, data, sample, sample_labels, self.k, queries)
    }
}

/// Majority label among the `k` nearest sample items of each query.
///
/// Distance ties go to the earlier sample position; vote ties go to the
/// smallest label.
pub fn knn_extend<O: Observations + ?Sized>(
    spec: &KernelSpec,
    data: &O,
    sample: &[usize],
    sample_labels: &[usize],
    k: usize,
    queries: &[usize],
) -> Result<Vec<usize>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample_labels.len() != sample.len() {
        return Err(Error::DimensionMismatch {
            expected: sample.len(),
            found: sample_labels.len(),
        });
    }
    if k == 0 || k > sample.len() {
        return Err(Error::InvalidParameter(format!(
            "knn k must be in 1..={}, got {k}",
            sample.len()
        )));
    }
    let n_labels = sample_labels.iter().max().map_or(0, |m| m + 1);
    let self_sample = sample
        .iter()
        .map(|&s| data.kernel(spec, s, s))
        .collect::<Result<Vec<f64>>>()?;

    let results = par::map(queries.len(), |qi| -> Result<usize> {
        let q = queries[qi];
        let kqq = data.kernel(spec, q, q)?;
        let mut dist = Vec::with_capacity(sample.len());
        for (pos, &s) in sample.iter().enumerate() {
            let d = distance_from_parts(kqq, self_sample[pos], data.kernel(spec, q, s)?);
            dist.push((d, pos));
        }
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, order);
        }
        let mut votes = vec![0usize; n_labels];
        for &(_, pos) in &dist[..k] {
            votes[sample_labels[pos]] += 1;
        }
        let mut winner = 0;
        for (label, &v) in votes.iter().enumerate() {
            if v > votes[winner] {
                winner = label;
            }
        }
        Ok(winner)
    });
    results.into_iter().collect()
}

/// Pipeline stages, reported to observers in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sample,
    Gram,
    Decompose,
    Cut,
    Extend,
    Done,
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Labels for every item.
    pub labels: ClusterLabels,
    /// Hierarchy over the sample; `leaf_ids` maps leaves to items.
    pub tree: Dendrogram,
    pub sample: Vec<usize>,
    pub decomposition: TreeletDecomposition,
}

pub fn fit_predict<O: Observations + ?Sized>(data: &O, config: &KtConfig) -> Result<FitResult> {
    fit_predict_observed(data, config, PairSearch::Cached, |_| {})
}

/// [`fit_predict`] with a callback invoked as each stage begins.
pub fn fit_predict_observed<O: Observations + ?Sized>(
    data: &O,
    config: &KtConfig,
    search: PairSearch,
    mut observer: impl FnMut(Stage),
) -> Result<FitResult> {
    let n = data.len();
    config.validate(n)?;
    data.check_kernel(&config.kernel)?;

    observer(Stage::Sample);
    let sample = sample_indices(n, config.sample_size, config.seed)?;

    observer(Stage::Gram);
    let a0 = gram(&config.kernel, data, &sample)?;

    observer(Stage::Decompose);
    let decomposition = decompose_with(
        a0,
        DecomposeOptions {
            lambda: config.lambda,
            stop_tol: config.stop_tol,
            search,
        },
    )?;

    observer(Stage::Cut);
    let tree = merge_tree(&decomposition).with_leaf_ids(sample.clone())?;
    let sample_labels = tree.cut(config.n_clusters)?;

    let mut raw = vec![usize::MAX; n];
    for (pos, &item) in sample.iter().enumerate() {
        raw[item] = sample_labels.get(pos);
    }
    if sample.len() < n {
        observer(Stage::Extend);
        let queries: Vec<usize> = (0..n).filter(|&i| raw[i] == usize::MAX).collect();
        let extension = KnnExtension { k: config.knn_k };
        let extended = extension.extend(
            &config.kernel,
            data,
            &sample,
            sample_labels.assignments(),
            &queries,
        )?;
        for (&q, l) in queries.iter().zip(extended) {
            raw[q] = l;
        }
    }
    observer(Stage::Done);

    Ok(FitResult {
        labels: ClusterLabels::from_raw(&raw),
        tree,
        sample,
        decomposition,
    })
}
