//! Browser bindings for the kernel treelet demo.
//!
//! Every export takes plain numbers and strings and returns a JSON string, so
//! the page needs no glue beyond `JSON.parse`. The plain functions
//! below the bindings hold the logic and are tested natively.

use kernel_treelets::datagen::{self, ShapeSpec, DEFAULT_FACTOR};
use kernel_treelets::eval::{self, Reference};
use kernel_treelets::extend::{self, KtConfig};
use kernel_treelets::{ClusterLabels, KernelSpec, Result};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Clusters a generated 2-D shape; see [`cluster_shape`].
#[wasm_bindgen(js_name = clusterShape)]
pub fn cluster_shape_json(
    shape: &str,
    n: usize,
    noise: f64,
    sigma: f64,
    clusters: usize,
    sample_size: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    let params = ShapeParams {
        shape,
        n,
        noise,
        seed: seed.into(),
    };
    to_json(cluster_shape(&params, sigma, clusters, sample_size))
}

/// ROC curves of the treelet hierarchy and a k-means sweep; see [`roc_curves`].
#[wasm_bindgen(js_name = rocCurves)]
pub fn roc_curves_json(
    shape: &str,
    n: usize,
    noise: f64,
    sigma: f64,
    sample_size: usize,
    max_k: usize,
    seed: u32,
) -> std::result::Result<String, JsError> {
    let params = ShapeParams {
        shape,
        n,
        noise,
        seed: seed.into(),
    };
    to_json(roc_curves(&params, sigma, sample_size, max_k))
}

/// Median agreement per sample size; `sizes` is comma separated.
#[wasm_bindgen(js_name = sampleSweep)]
pub fn sample_sweep_json(
    shape: &str,
    n: usize,
    noise: f64,
    sigma: f64,
    clusters: usize,
    sizes: &str,
    trials: usize,
) -> std::result::Result<String, JsError> {
    let sizes = parse_sizes(sizes).map_err(|e| JsError::new(&e))?;
    let params = ShapeParams {
        shape,
        n,
        noise,
        seed: 0,
    };
    to_json(sample_sweep(&params, sigma, clusters, &sizes, trials))
}

fn to_json<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

pub struct ShapeParams<'a> {
    pub shape: &'a str,
    pub n: usize,
    /// Used by circles and moons; the blob shapes keep their own spreads.
    pub noise: f64,
    pub seed: u64,
}

impl ShapeParams<'_> {
    fn spec(&self) -> Result<ShapeSpec> {
        match self.shape {
            "circles" => Ok(ShapeSpec::circles(
                DEFAULT_FACTOR,
                self.noise,
                self.n,
                self.seed,
            )),
            "moons" => Ok(ShapeSpec::moons(self.noise, self.n, self.seed)),
            other => ShapeSpec::named(other, self.n, self.seed),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ClusterView {
    pub points: Vec<[f64; 2]>,
    pub truth: Vec<usize>,
    pub labels: Vec<usize>,
    /// Items that went through the decomposition; the rest were labelled by vote.
    pub sample: Vec<usize>,
    pub agreement: f64,
    pub merges: usize,
}

pub fn cluster_shape(
    params: &ShapeParams,
    sigma: f64,
    clusters: usize,
    sample_size: usize,
) -> Result<ClusterView> {
    let generated = datagen::generate(&params.spec()?)?;
    let config =
        KtConfig::new(KernelSpec::Rbf { sigma }, sample_size, clusters).with_seed(params.seed);
    let fit = extend::fit_predict(&generated.data, &config)?;
    let data = &generated.data;
    Ok(ClusterView {
        points: (0..data.n_rows())
            .map(|i| [data.row(i)[0], data.row(i)[1]])
            .collect(),
        truth: generated.labels.assignments().to_vec(),
        labels: fit.labels.assignments().to_vec(),
        sample: fit.sample,
        agreement: eval::pair_agreement(&fit.labels, &generated.labels)?,
        merges: fit.decomposition.stop_level(),
    })
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

#[derive(Debug, Serialize)]
pub struct RocView {
    pub treelets: Curve,
    pub kmeans: Curve,
}

/// The treelet curve is scored on the sample it was built from; the k-means
/// sweep over `k = 1..=max_k` is scored on every item.
pub fn roc_curves(
    params: &ShapeParams,
    sigma: f64,
    sample_size: usize,
    max_k: usize,
) -> Result<RocView> {
    let generated = datagen::generate(&params.spec()?)?;
    let reference = Reference::Classes(generated.labels.assignments().to_vec());
    let config = KtConfig::new(KernelSpec::Rbf { sigma }, sample_size, 1).with_seed(params.seed);
    let fit = extend::fit_predict(&generated.data, &config)?;
    let tree = eval::roc_from_hierarchy(&fit.tree, &reference)?;

    let max_k = max_k.min(generated.data.n_rows());
    let partitions = (1..=max_k)
        .map(|k| eval::kmeans(&generated.data, k, params.seed, 300))
        .collect::<Result<Vec<ClusterLabels>>>()?;
    let km = eval::roc_from_partitions(&partitions, &reference)?;

    let curve = |c: &eval::RocCurve| Curve {
        points: c.points().to_vec(),
        auc: c.auc(),
    };
    Ok(RocView {
        treelets: curve(&tree),
        kmeans: curve(&km),
    })
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub sample_size: usize,
    pub median: f64,
    pub agreements: Vec<f64>,
}

/// Runs `trials` seeds per sample size on one fixed data set. Runs use a zero
/// stop tolerance so every run yields a full hierarchy to cut.
pub fn sample_sweep(
    params: &ShapeParams,
    sigma: f64,
    clusters: usize,
    sizes: &[usize],
    trials: usize,
) -> Result<Vec<SweepRow>> {
    let generated = datagen::generate(&params.spec()?)?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut agreements = (0..trials as u64)
            .map(|seed| {
                let mut config =
                    KtConfig::new(KernelSpec::Rbf { sigma }, size, clusters).with_seed(seed);
                config.stop_tol = 0.0;
                let fit = extend::fit_predict(&generated.data, &config)?;
                eval::pair_agreement(&fit.labels, &generated.labels)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(SweepRow {
            sample_size: size,
            median: median(&mut agreements.clone()),
            agreements: std::mem::take(&mut agreements),
        });
    }
    Ok(rows)
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

pub fn parse_sizes(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| format!("bad sample size '{t}'"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circles(n: usize) -> ShapeParams<'static> {
        ShapeParams {
            shape: "circles",
            n,
            noise: 0.05,
            seed: 1,
        }
    }

    #[test]
    fn circles_are_separated() {
        let view = cluster_shape(&circles(300), 0.1, 2, 300).unwrap();
        assert_eq!(view.points.len(), 300);
        assert_eq!(view.labels.len(), 300);
        assert_eq!(view.merges, 299);
        assert!(view.agreement > 0.95, "agreement {}", view.agreement);
    }

    #[test]
    fn partial_sample_labels_everyone() {
        let view = cluster_shape(&circles(300), 0.1, 2, 120).unwrap();
        assert_eq!(view.sample.len(), 120);
        assert_eq!(view.labels.len(), 300);
    }

    #[test]
    fn roc_curves_span_unit_square() {
        let view = roc_curves(&circles(150), 0.1, 150, 10).unwrap();
        for c in [&view.treelets, &view.kmeans] {
            assert_eq!(c.points.first(), Some(&(0.0, 0.0)));
            assert_eq!(c.points.last(), Some(&(1.0, 1.0)));
            assert!((0.0..=1.0).contains(&c.auc));
        }
        assert!(view.treelets.auc > view.kmeans.auc);
    }

    #[test]
    fn sweep_reports_each_size() {
        let rows = sample_sweep(&circles(300), 0.1, 2, &[20, 300], 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].agreements.len(), 3);
        assert!(rows[1].median > 0.95);
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(cluster_shape(
            &ShapeParams {
                shape: "spiral",
                ..circles(10)
            },
            0.1,
            2,
            10
        )
        .is_err());
        assert!(cluster_shape(&circles(10), 0.1, 2, 50).is_err());
        assert!(parse_sizes("10, x").is_err());
        assert_eq!(parse_sizes("10, 20,").unwrap(), vec![10, 20]);
    }

    #[test]
    fn median_of_even_count() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0, 4.0]), 2.5);
    }
}
