//! Treelet induction on a symmetric positive semi-definite matrix.
//!
//! Each step scores every pair of active (scaling) indices by
//!
//! ```text
//! M_ij = sqrt(A_ij² / (A_ii A_jj)) + λ |A_ij|
//! ```
//!
//! rotates the best pair so their off-diagonal entry vanishes, and retires
//! the index left with the smaller diagonal. The retired index is `alpha`;
//! the survivor `beta` keeps representing the merged group.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_coeffs, RotationCoeffs, SymMatrix};

/// Default early-stop threshold on the pair score.
pub const DEFAULT_STOP_TOL: f64 = 1e-10;

/// Diagonal products at or below this are treated as zero when scoring.
const TINY_DIAG_PRODUCT: f64 = 1e-300;

/// Most negative diagonal accepted as round-off from a PSD kernel.
const NEGATIVE_DIAG_SLACK: f64 = 1e-10;

/// One treelet step. `coeffs` is expressed for the plane `(alpha, beta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationRecord {
    pub step: usize,
    pub alpha: usize,
    pub beta: usize,
    pub coeffs: RotationCoeffs,
    pub diag_alpha: f64,
    pub diag_beta: f64,
    /// Pair score that selected this step.
    pub score: f64,
}

impl RotationRecord {
    /// The same rotation expressed for the plane `(min, max)`, the
    /// orientation used while decomposing.
    pub fn canonical(&self) -> (usize, usize, RotationCoeffs) {
        if self.alpha < self.beta {
            (self.alpha, self.beta, self.coeffs)
        } else {
            (self.beta, self.alpha, self.coeffs.swapped())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeletDecomposition {
    dim: usize,
    records: Vec<RotationRecord>,
    final_diag: Vec<f64>,
    lambda: f64,
}

/// How the best pair is located at each step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PairSearch {
    /// Per-index best-partner cache, refreshed only where a rotation changed it.
    #[default]
    Cached,
    /// Full rescan of all active pairs every step.
    Naive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecomposeOptions {
    pub lambda: f64,
    pub stop_tol: f64,
    pub search: PairSearch,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            lambda: 0.0,
            stop_tol: DEFAULT_STOP_TOL,
            search: PairSearch::Cached,
        }
    }
}

/// Pair score; the correlation term is 0 when the diagonal product is tiny.
#[inline]
pub fn pair_score(a: &SymMatrix, i: usize, j: usize, lambda: f64) -> f64 {
    score_from(a.get(i, j), a.get(i, i), a.get(j, j), lambda)
}

#[inline]
fn score_from(aij: f64, aii: f64, ajj: f64, lambda: f64) -> f64 {
    let prod = aii * ajj;
    let corr = if prod <= TINY_DIAG_PRODUCT {
        0.0
    } else {
        (aij * aij / prod).sqrt()
    };
    corr + lambda * aij.abs()
}

/// Candidate pair `(score, lo, hi)` with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    score: f64,
    lo: usize,
    hi: usize,
}

impl Candidate {
    fn new(score: f64, i: usize, j: usize) -> Self {
        Candidate {
            score,
            lo: i.min(j),
            hi: i.max(j),
        }
    }

    /// Higher score wins; equal scores go to the lexicographically smaller pair.
    fn beats(&self, other: &Candidate) -> bool {
        self.score > other.score
            || (self.score == other.score && (self.lo, self.hi) < (other.lo, other.hi))
    }

    fn partner_of(&self, i: usize) -> usize {
        if self.lo == i {
            self.hi
        } else {
            self.lo
        }
    }
}

fn best_of(best: Option<Candidate>, c: Candidate) -> Option<Candidate> {
    match best {
        Some(b) if !c.beats(&b) => Some(b),
        _ => Some(c),
    }
}

/// Best pair among `active` as `(lo, hi, score)` with `lo < hi`.
///
/// Ties go to the lexicographically smallest `(lo, hi)`.
pub fn select_pair(a: &SymMatrix, active: &[usize], lambda: f64) -> Result<(usize, usize, f64)> {
    if active.len() < 2 {
        return Err(Error::TooFewActive);
    }
    for &i in active {
        if i >= a.dim() {
            return Err(Error::IndexOutOfRange {
                index: i,
                dim: a.dim(),
            });
        }
    }
    let b = exhaustive_best(active, |i, j| pair_score(a, i, j, lambda));
    Ok((b.lo, b.hi, b.score))
}

fn exhaustive_best(active: &[usize], score: impl Fn(usize, usize) -> f64) -> Candidate {
    let mut best = None;
    for (x, &i) in active.iter().enumerate() {
        for &j in &active[x + 1..] {
            best = best_of(best, Candidate::new(score(i, j), i, j));
        }
    }
    best.expect("at least one pair")
}

/// Full symmetric copy used inside the decomposition loop, stored in square
/// tiles so that column walks stay on few pages. Indices map to slots so the
/// matrix can shrink to the active rows as indices retire.
struct Square {
    dim: usize,
    tiles: usize,
    data: Vec<f64>,
    slot: Vec<usize>,
}

const TILE: usize = 64;

impl Square {
    fn zeros(dim: usize) -> Self {
        let tiles = dim.div_ceil(TILE);
        Square {
            dim,
            tiles,
            data: vec![0.0; tiles * tiles * TILE * TILE],
            slot: (0..dim).collect(),
        }
    }

    fn from_sym(a: &SymMatrix) -> Self {
        let mut sq = Square::zeros(a.dim());
        let packed = a.packed_data();
        for bi in (0..sq.dim).step_by(TILE) {
            for bj in (0..=bi).step_by(TILE) {
                for i in bi..(bi + TILE).min(sq.dim) {
                    let start = i * (i + 1) / 2;
                    for j in bj..(bj + TILE).min(i + 1) {
                        let v = packed[start + j];
                        let (ij, ji) = (sq.offset(i, j), sq.offset(j, i));
                        sq.data[ij] = v;
                        sq.data[ji] = v;
                    }
                }
            }
        }
        sq
    }

    /// Position of slot row `r` within the data, to be added to [`Square::col`].
    #[inline]
    fn row_base(&self, r: usize) -> usize {
        (r / TILE) * self.tiles * TILE * TILE + (r % TILE) * TILE
    }

    #[inline]
    fn col(c: usize) -> usize {
        (c / TILE) * TILE * TILE + c % TILE
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        self.row_base(r) + Self::col(c)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.offset(self.slot[i], self.slot[j])]
    }

    /// Same arithmetic as [`SymMatrix::rotate`] for `p < q`, restricted to the
    /// rows in `live`. Entries against retired indices are never read again.
    fn rotate(&mut self, p: usize, q: usize, coeffs: RotationCoeffs, live: &[usize]) {
        debug_assert!(p < q);
        let RotationCoeffs { c, s } = coeffs;
        let app = self.get(p, p);
        let aqq = self.get(q, q);
        let apq = self.get(p, q);
        let (sp, sq) = (self.slot[p], self.slot[q]);
        let (row_p, row_q) = (self.row_base(sp), self.row_base(sq));
        let (col_p, col_q) = (Self::col(sp), Self::col(sq));
        for &k in live.iter().filter(|&&k| k != p && k != q) {
            let sk = self.slot[k];
            let (row_k, col_k) = (self.row_base(sk), Self::col(sk));
            let (akp, akq) = (self.data[row_p + col_k], self.data[row_q + col_k]);
            let (new_p, new_q) = (c * akp - s * akq, s * akp + c * akq);
            self.data[row_p + col_k] = new_p;
            self.data[row_q + col_k] = new_q;
            self.data[row_k + col_p] = new_p;
            self.data[row_k + col_q] = new_q;
        }
        let cs = c * s;
        self.data[row_p + col_p] = c * c * app - 2.0 * cs * apq + s * s * aqq;
        self.data[row_q + col_q] = s * s * app + 2.0 * cs * apq + c * c * aqq;
        self.data[row_p + col_q] = 0.0;
        self.data[row_q + col_p] = 0.0;
    }

    /// Drops every row and column outside `live` once half the slots are dead.
    fn shrink_to(&mut self, live: &[usize]) {
        let m = live.len();
        if 2 * m > self.dim || m < TILE {
            return;
        }
        let mut next = Square::zeros(m);
        for (x, &i) in live.iter().enumerate() {
            let row = next.row_base(x);
            for (y, &j) in live.iter().enumerate() {
                next.data[row + Self::col(y)] = self.get(i, j);
            }
        }
        for (x, &i) in live.iter().enumerate() {
            self.slot[i] = x;
        }
        self.dim = m;
        self.tiles = next.tiles;
        self.data = next.data;
    }
}

fn validate_input(a0: &SymMatrix, opts: &DecomposeOptions) -> Result<()> {
    if !a0.is_finite() {
        return Err(Error::NonFinite);
    }
    if !(opts.lambda >= 0.0 && opts.lambda.is_finite()) {
        return Err(Error::InvalidParameter(
            "lambda must be non-negative".into(),
        ));
    }
    if !(opts.stop_tol >= 0.0) {
        return Err(Error::InvalidParameter(
            "stop tolerance must be non-negative".into(),
        ));
    }
    for i in 0..a0.dim() {
        let d = a0.get(i, i);
        if d < -NEGATIVE_DIAG_SLACK {
            return Err(Error::NegativeDiagonal { index: i, value: d });
        }
    }
    Ok(())
}

/// Decomposes `a0` with the default pair search.
pub fn decompose(a0: &SymMatrix, lambda: f64, stop_tol: f64) -> Result<TreeletDecomposition> {
    decompose_with(
        a0.clone(),
        DecomposeOptions {
            lambda,
            stop_tol,
            ..Default::default()
        },
    )
}

/// Runs the treelet loop on `a0`.
///
/// Stops after `p − 1` merges, or earlier once the best remaining score
/// drops below `stop_tol`.
pub fn decompose_with(a0: SymMatrix, opts: DecomposeOptions) -> Result<TreeletDecomposition> {
    validate_input(&a0, &opts)?;
    let p = a0.dim();
    let lambda = opts.lambda;
    let mut records = Vec::with_capacity(p.saturating_sub(1));
    let mut active_list: Vec<usize> = (0..p).collect();
    let mut diag = a0.diagonal();
    let mut a = Square::from_sym(&a0);
    drop(a0);

    let row_best =
        |a: &Square, diag: &[f64], active_list: &[usize], i: usize| -> Option<Candidate> {
            let row = a.row_base(a.slot[i]);
            let mut best = None;
            for &j in active_list.iter().filter(|&&j| j != i) {
                let aij = a.data[row + Square::col(a.slot[j])];
                let score = score_from(aij, diag[i], diag[j], lambda);
                best = best_of(best, Candidate::new(score, i, j));
            }
            best
        };

    let mut cache: Vec<Option<Candidate>> = match opts.search {
        PairSearch::Cached => (0..p)
            .map(|i| row_best(&a, &diag, &active_list, i))
            .collect(),
        PairSearch::Naive => Vec::new(),
    };

    for step in 1..p {
        let chosen = match opts.search {
            PairSearch::Cached => cache
                .iter()
                .flatten()
                .fold(None, |acc, &c| best_of(acc, c))
                .expect("two or more active indices"),
            PairSearch::Naive => exhaustive_best(&active_list, |i, j| {
                score_from(a.get(i, j), diag[i], diag[j], lambda)
            }),
        };
        if chosen.score < opts.stop_tol {
            break;
        }
        let (lo, hi) = (chosen.lo, chosen.hi);
        let coeffs = jacobi_coeffs(diag[lo], diag[hi], a.get(lo, hi))?;
        a.rotate(lo, hi, coeffs, &active_list);
        let (d_lo, d_hi) = (a.get(lo, lo), a.get(hi, hi));
        diag[lo] = d_lo;
        diag[hi] = d_hi;
        let (alpha, beta, coeffs) = if d_hi < d_lo {
            (hi, lo, coeffs.swapped())
        } else {
            (lo, hi, coeffs)
        };
        records.push(RotationRecord {
            step,
            alpha,
            beta,
            coeffs,
            diag_alpha: diag[alpha],
            diag_beta: diag[beta],
            score: chosen.score,
        });
        active_list.retain(|&i| i != alpha);
        a.shrink_to(&active_list);

        if opts.search == PairSearch::Cached {
            cache[alpha] = None;
            // row beta holds a(i, beta) with unit stride inside each tile
            let beta_row = a.row_base(a.slot[beta]);
            for &i in &active_list {
                if i == beta {
                    continue;
                }
                let stale = cache[i].is_some_and(|c| {
                    let partner = c.partner_of(i);
                    partner == alpha || partner == beta
                });
                if stale {
                    cache[i] = row_best(&a, &diag, &active_list, i);
                } else {
                    let score = score_from(
                        a.data[beta_row + Square::col(a.slot[i])],
                        diag[i],
                        diag[beta],
                        lambda,
                    );
                    cache[i] = best_of(cache[i], Candidate::new(score, i, beta));
                }
            }
            cache[beta] = row_best(&a, &diag, &active_list, beta);
        }
    }

    Ok(TreeletDecomposition {
        dim: p,
        final_diag: diag,
        records,
        lambda,
    })
}

impl TreeletDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[RotationRecord] {
        &self.records
    }

    /// Number of rotations performed, `L`.
    pub fn stop_level(&self) -> usize {
        self.records.len()
    }

    /// Whether the loop stopped before reaching a single scaling index.
    pub fn stopped_early(&self) -> bool {
        self.dim > 0 && self.records.len() < self.dim - 1
    }

    pub fn final_diag(&self) -> &[f64] {
        &self.final_diag
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn check_level(&self, k: usize) -> Result<()> {
        if k > self.stop_level() {
            return Err(Error::LevelOutOfRange {
                level: k,
                max: self.stop_level(),
            });
        }
        Ok(())
    }

    /// Membership mask of the scaling set `S_k`.
    pub fn scaling_mask(&self, k: usize) -> Result<Vec<bool>> {
        self.check_level(k)?;
        let mut mask = vec![true; self.dim];
        for r in &self.records[..k] {
            mask[r.alpha] = false;
        }
        Ok(mask)
    }

    /// Sorted scaling indices `S_k`.
    pub fn scaling_set(&self, k: usize) -> Result<Vec<usize>> {
        Ok(self
            .scaling_mask(k)?
            .into_iter()
            .enumerate()
            .filter_map(|(i, m)| m.then_some(i))
            .collect())
    }

    /// `B_k v`, the level-`k` basis representation of `v`.
    pub fn apply_basis(&self, k: usize, v: &[f64]) -> Result<Vec<f64>> {
        self.check_level(k)?;
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        let mut out = v.to_vec();
        for r in &self.records[..k] {
            let RotationCoeffs { c, s } = r.coeffs;
            let (x, y) = (out[r.alpha], out[r.beta]);
            out[r.alpha] = c * x - s * y;
            out[r.beta] = s * x + c * y;
        }
        Ok(out)
    }

    /// `B_k v` with detail coordinates below `epsilon` in magnitude set to zero.
    pub fn compress(&self, k: usize, v: &[f64], epsilon: f64) -> Result<Vec<f64>> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(
                "epsilon must be non-negative".into(),
            ));
        }
        let mut out = self.apply_basis(k, v)?;
        let mask = self.scaling_mask(k)?;
        for (x, scaling) in out.iter_mut().zip(mask) {
            if !scaling && x.abs() < epsilon {
                *x = 0.0;
            }
        }
        Ok(out)
    }

    /// `A_k`, obtained by replaying the first `k` rotations on `a0`.
    pub fn replay(&self, a0: &SymMatrix, k: usize) -> Result<SymMatrix> {
        self.check_level(k)?;
        if a0.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: a0.dim(),
            });
        }
        let mut a = a0.clone();
        for r in &self.records[..k] {
            let (p, q, coeffs) = r.canonical();
            a.rotate(p, q, coeffs)?;
        }
        Ok(a)
    }
}
