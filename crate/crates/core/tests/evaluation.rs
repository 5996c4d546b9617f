use kernel_treelets::eval::{
    auc, hierarchy_matching_matrices, matching_matrix, roc_from_hierarchy, Reference, RocCurve,
};
use kernel_treelets::hierarchy::Merge;
use kernel_treelets::{ClusterLabels, Dendrogram, Graph};
use kt_oracles::*;
use rand::Rng;

fn random_tree(r: &mut OracleRng, n: usize) -> (Dendrogram, Vec<(usize, usize)>) {
    let pairs = random_merges(r, n);
    let merges = pairs
        .iter()
        .enumerate()
        .map(|(k, &(removed, kept))| Merge {
            step: k + 1,
            removed,
            kept,
            score: 1.0 / (k + 1) as f64,
        })
        .collect();
    (Dendrogram::new(n, merges).unwrap(), pairs)
}

fn random_reference(r: &mut OracleRng, n: usize) -> Reference {
    if r.random_bool(0.5) {
        let k = r.random_range(1..=5);
        Reference::Classes((0..n).map(|_| r.random_range(0..k)).collect())
    } else {
        let density = r.random_range(0.0..0.6);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if r.random_bool(density) {
                    edges.push((u, v));
                }
            }
        }
        Reference::Graph(Graph::from_edges(n, edges).unwrap())
    }
}

#[test]
fn incremental_counts_match_brute_force() {
    let mut r = rng(99);
    for _ in 0..100 {
        let n = r.random_range(1..=50);
        let (tree, pairs) = random_tree(&mut r, n);
        let reference = random_reference(&mut r, n);
        let got = hierarchy_matching_matrices(&tree, &reference).unwrap();
        assert_eq!(got.len(), pairs.len() + 1);
        for (m, mm) in got.iter().enumerate() {
            let labels = labels_after(n, &pairs[..m]);
            let want = brute_counts(&labels, |i, j| reference.is_positive(i, j));
            assert_eq!([mm.tp, mm.fp, mm.tn, mm.fn_], want, "cut after {m} merges");
            let flat = matching_matrix(&ClusterLabels::from_raw(&labels), &reference).unwrap();
            assert_eq!(&flat, mm);
        }
    }
}

#[test]
fn curve_from_nested_cuts_is_monotone() {
    let mut r = rng(3);
    for _ in 0..50 {
        let n = r.random_range(2..=40);
        let (tree, _) = random_tree(&mut r, n);
        let curve = roc_from_hierarchy(&tree, &random_reference(&mut r, n)).unwrap();
        let pts = curve.points();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        let a = auc(&curve);
        assert!((0.0..=1.0).contains(&a));
    }
}

#[test]
fn single_interior_point_trapezoid() {
    let mut r = rng(17);
    for _ in 0..100 {
        let (f, t): (f64, f64) = (r.random(), r.random());
        let curve = RocCurve::new(vec![(f, t)]).unwrap();
        let want = trapezoid(&[(0.0, 0.0), (f, t), (1.0, 1.0)]);
        assert_eq!(curve.points().len(), 3);
        assert!((auc(&curve) - want).abs() <= 1e-12);
    }
}

#[test]
fn hand_checked_areas() {
    let cases: [(&[(f64, f64)], f64); 3] = [(&[], 0.5), (&[(0.0, 1.0)], 1.0), (&[(0.2, 0.8)], 0.8)];
    for (pts, want) in cases {
        assert!((auc(&RocCurve::new(pts.to_vec()).unwrap()) - want).abs() <= 1e-12);
    }
}
