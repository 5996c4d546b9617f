use kernel_treelets::linalg::psd_sqrt;
use kernel_treelets::treelet::{decompose, decompose_with, DecomposeOptions, PairSearch};
use kernel_treelets::SymMatrix;
use kt_oracles::*;
use rand::Rng;

fn sym(a: &Dense) -> SymMatrix {
    SymMatrix::from_fn(a.len(), |i, j| a[i][j])
}

fn merges_of(d: &kernel_treelets::TreeletDecomposition) -> Vec<(usize, usize)> {
    d.records().iter().map(|r| (r.alpha, r.beta)).collect()
}

#[test]
fn replay_matches_dense_conjugation() {
    let mut r = rng(11);
    for &p in &[4usize, 8, 16, 32] {
        for trial in 0..3 {
            let a0 = sym(&random_spsd(&mut r, p, p + trial));
            let d = decompose(&a0, 0.0, 1e-10).unwrap();
            assert_eq!(d.stop_level(), p - 1);
            let mut b = identity(p);
            for k in 0..=d.stop_level() {
                if k > 0 {
                    let rec = &d.records()[k - 1];
                    let mut jt = identity(p);
                    let (a, be) = (rec.alpha, rec.beta);
                    jt[a][a] = rec.coeffs.c;
                    jt[be][be] = rec.coeffs.c;
                    jt[a][be] = -rec.coeffs.s;
                    jt[be][a] = rec.coeffs.s;
                    b = matmul(&jt, &b);
                }
                let bbt = matmul(&b, &transpose(&b));
                assert!(max_abs_diff(&bbt, &identity(p)) < 1e-8);
                let ak_dense = matmul(&matmul(&b, &a0.to_dense()), &transpose(&b));
                let ak = d.replay(&a0, k).unwrap();
                let scale = a0.norm_inf().max(1.0);
                assert!(
                    max_abs_diff(&ak.to_dense(), &ak_dense) <= 1e-8 * scale,
                    "p={p} k={k}"
                );
                assert_eq!(d.scaling_set(k).unwrap().len(), p - k);
                if k > 0 {
                    let rec = &d.records()[k - 1];
                    assert!(rec.diag_alpha <= rec.diag_beta);
                    assert_eq!(ak.get(rec.alpha, rec.beta), 0.0);
                    assert_eq!(ak.get(rec.alpha, rec.alpha), rec.diag_alpha);
                }
            }
        }
    }
}

#[test]
fn apply_basis_is_dense_basis_product() {
    let mut r = rng(5);
    let a0 = sym(&random_spsd(&mut r, 9, 4));
    let d = decompose(&a0, 0.3, 1e-10).unwrap();
    let v: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
    for k in 0..=d.stop_level() {
        let columns: Vec<Vec<f64>> = (0..9)
            .map(|j| d.apply_basis(k, &identity(9)[j]).unwrap())
            .collect();
        let bk = transpose(&columns);
        let want = matmul(&bk, &v.iter().map(|&x| vec![x]).collect::<Vec<_>>());
        let got = d.apply_basis(k, &v).unwrap();
        for i in 0..9 {
            assert!((want[i][0] - got[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn cached_search_matches_full_rescan() {
    let mut r = rng(2024);
    for _ in 0..200 {
        let p = r.random_range(2..=24);
        let rank = r.random_range(1..=p + 2);
        let lambda = if r.random_bool(0.5) {
            0.0
        } else {
            r.random_range(0.0..1.0)
        };
        let a0 = sym(&random_spsd(&mut r, p, rank));
        let run = |search| {
            decompose_with(
                a0.clone(),
                DecomposeOptions {
                    lambda,
                    stop_tol: 1e-10,
                    search,
                },
            )
            .unwrap()
        };
        let (cached, naive) = (run(PairSearch::Cached), run(PairSearch::Naive));
        assert_eq!(cached.records(), naive.records());
    }
}

#[test]
fn matches_dense_reference_loop() {
    let mut r = rng(77);
    for _ in 0..50 {
        let p = r.random_range(2..=12);
        let a0 = sym(&random_spsd(&mut r, p, p));
        let d = decompose(&a0, 0.0, 1e-10).unwrap();
        assert_eq!(merges_of(&d), reference_merges(&a0.to_dense(), 0.0, 1e-10));
    }
}

#[test]
fn square_root_product_gives_same_merges() {
    let mut r = rng(31);
    for _ in 0..50 {
        let p = r.random_range(2..=16);
        let k = sym(&random_spsd(&mut r, p, p + 3));
        let s = psd_sqrt(&k, 1e-9).unwrap().to_dense();
        let ss = matmul(&s, &s);
        let k2 = SymMatrix::from_fn(p, |i, j| 0.5 * (ss[i][j] + ss[j][i]));
        let a = decompose(&k, 0.0, 1e-10).unwrap();
        let b = decompose(&k2, 0.0, 1e-10).unwrap();
        assert_eq!(merges_of(&a), merges_of(&b));
    }
}

#[test]
fn zero_similarity_stops_immediately() {
    let d = decompose(&SymMatrix::identity(6), 0.0, 1e-10).unwrap();
    assert_eq!(d.stop_level(), 0);
    assert!(d.stopped_early());
}

#[test]
fn large_decompositions_match_reference_and_replay() {
    let mut r = rng(5);
    // large enough for the working matrix to shrink mid-run
    let p = 131;
    let a0 = sym(&random_spsd(&mut r, p, p));
    let d = decompose(&a0, 0.0, 0.0).unwrap();
    assert_eq!(merges_of(&d), reference_merges(&a0.to_dense(), 0.0, 0.0));
    for (k, rec) in d.records().iter().enumerate().step_by(7) {
        let ak = d.replay(&a0, k + 1).unwrap();
        assert_eq!(ak.get(rec.alpha, rec.alpha), rec.diag_alpha, "k={k}");
        assert_eq!(ak.get(rec.beta, rec.beta), rec.diag_beta, "k={k}");
    }
    let end = d.replay(&a0, d.stop_level()).unwrap();
    assert_eq!(end.diagonal(), d.final_diag());
}
