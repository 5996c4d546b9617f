//! Symmetric matrix storage and Jacobi (Givens) rotations.
//!
//! [`SymMatrix`] keeps one cell per unordered index pair, so symmetry is a
//! property of the layout rather than something that has to be maintained
//! numerically. Rotations use the layout
//!
//! ```text
//! J[p][p] = J[q][q] = c,   J[p][q] = s,   J[q][p] = -s
//! ```
//!
//! and [`SymMatrix::rotate`] replaces `A` with `JᵀAJ` in `O(p)` time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symmetric `p × p` matrix, packed lower triangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated once per unordered pair with `i >= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        SymMatrix { dim, data }
    }

    /// Wraps packed lower-triangle storage (row `i` holds columns `0..=i`).
    pub fn from_packed(dim: usize, data: Vec<f64>) -> Result<Self> {
        let expected = dim * (dim + 1) / 2;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(SymMatrix { dim, data })
    }

    /// Reads the lower triangle of a dense square matrix. The upper triangle must mirror it.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            for j in 0..i {
                if row[j] != rows[j][i] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[packed(i, j)] = value;
    }

    pub fn packed_data(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim {
            for j in 0..=i {
                let v = self.get(i, j);
                sum += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        sum.sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.dim {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.dim,
            });
        }
        Ok(())
    }

    /// Replaces `A` with `JᵀAJ` for the rotation in plane `(p, q)`.
    ///
    /// Only rows and columns `p` and `q` are touched. Entry `(p, q)` is
    /// written as an exact zero.
    pub fn rotate(&mut self, p: usize, q: usize, coeffs: RotationCoeffs) -> Result<()> {
        self.check_index(p)?;
        self.check_index(q)?;
        if p == q {
            return Err(Error::DegeneratePlane(p));
        }
        let RotationCoeffs { c, s } = coeffs;
        let (p, q, s) = if p < q { (p, q, s) } else { (q, p, -s) };
        let app = self.get(p, p);
        let aqq = self.get(q, q);
        let apq = self.get(p, q);
        // packed offsets: (i, j) with i >= j lives at row_start(i) + j
        let row_start = |i: usize| i * (i + 1) / 2;
        let (rp, rq) = (row_start(p), row_start(q));
        let data = &mut self.data;
        let mut turn = |ip: usize, iq: usize| {
            let (akp, akq) = (data[ip], data[iq]);
            data[ip] = c * akp - s * akq;
            data[iq] = s * akp + c * akq;
        };
        for k in 0..p {
            turn(rp + k, rq + k);
        }
        for k in p + 1..q {
            turn(row_start(k) + p, rq + k);
        }
        for k in q + 1..self.dim {
            let rk = row_start(k);
            turn(rk + p, rk + q);
        }
        let cs = c * s;
        self.set(p, p, c * c * app - 2.0 * cs * apq + s * s * aqq);
        self.set(q, q, s * s * app + 2.0 * cs * apq + c * c * aqq);
        self.set(p, q, 0.0);
        Ok(())
    }

    /// Owned variant of [`SymMatrix::rotate`].
    pub fn apply_rotation(mut self, p: usize, q: usize, coeffs: RotationCoeffs) -> Result<Self> {
        self.rotate(p, q, coeffs)?;
        Ok(self)
    }
}

/// Cosine/sine pair of a plane rotation, with `c > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationCoeffs {
    pub c: f64,
    pub s: f64,
}

impl RotationCoeffs {
    pub const IDENTITY: RotationCoeffs = RotationCoeffs { c: 1.0, s: 0.0 };

    /// The same rotation expressed for the swapped plane `(q, p)`.
    pub fn swapped(self) -> Self {
        RotationCoeffs {
            c: self.c,
            s: -self.s,
        }
    }
}

/// Rotation that annihilates `a_pq` in the block `[[a_pp, a_pq], [a_pq, a_qq]]`.
///
/// Uses the small root `t = sgn(b) / (|b| + sqrt(b² + 1))` with
/// `b = (a_qq - a_pp) / (2 a_pq)` and `sgn(0) = 1`, then `c = 1/sqrt(t² + 1)`,
/// `s = c t`. Measuring `b` from `a_qq` makes the sign of `s` match the
/// `J[p][q] = s` layout used by [`SymMatrix::rotate`].
pub fn jacobi_coeffs(a_pp: f64, a_qq: f64, a_pq: f64) -> Result<RotationCoeffs> {
    if !(a_pp.is_finite() && a_qq.is_finite() && a_pq.is_finite()) {
        return Err(Error::NonFinite);
    }
    if a_pq == 0.0 {
        return Ok(RotationCoeffs::IDENTITY);
    }
    let b = (a_qq - a_pp) / (2.0 * a_pq);
    let t = if b.is_finite() {
        let sign = if b >= 0.0 { 1.0 } else { -1.0 };
        sign / (b.abs() + b.hypot(1.0))
    } else {
        // |b| overflowed; t ~ 1/(2b) underflows to zero
        0.0
    };
    let c = 1.0 / t.hypot(1.0);
    Ok(RotationCoeffs { c, s: c * t })
}

/// Symmetric PSD square root through a full Jacobi eigendecomposition.
///
/// Test oracle only: `O(p³)` per sweep. Eigenvalues in `[-tol, 0)` are
/// clamped to zero; anything below `-tol` is rejected.
pub fn psd_sqrt(k: &SymMatrix, tol: f64) -> Result<SymMatrix> {
    if !k.is_finite() {
        return Err(Error::NonFinite);
    }
    let (eigenvalues, vectors) = jacobi_eigen(k)?;
    let n = k.dim();
    let mut roots = Vec::with_capacity(n);
    for &lambda in &eigenvalues {
        if lambda < -tol {
            return Err(Error::NotPsd(lambda));
        }
        roots.push(lambda.max(0.0).sqrt());
    }
    Ok(SymMatrix::from_fn(n, |i, j| {
        (0..n)
            .map(|m| vectors[i][m] * roots[m] * vectors[j][m])
            .sum()
    }))
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigenvalue iteration. Returns eigenvalues and the dense
/// eigenvector matrix `V` (column `m` pairs with eigenvalue `m`).
pub(crate) fn jacobi_eigen(k: &SymMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = k.dim();
    let mut a = k.clone();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let threshold = 1e-12 * k.norm_inf();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                off = off.max(a.get(i, j).abs());
            }
        }
        if off <= threshold {
            return Ok((a.diagonal(), v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let coeffs = jacobi_coeffs(a.get(p, p), a.get(q, q), apq)?;
                a.rotate(p, q, coeffs)?;
                let RotationCoeffs { c, s } = coeffs;
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    Err(Error::InvalidParameter(
        "Jacobi eigenvalue iteration did not converge".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dense_jt_a_j(a: &[Vec<f64>], p: usize, q: usize, r: RotationCoeffs) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut j = vec![vec![0.0; n]; n];
        for (i, row) in j.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        j[p][p] = r.c;
        j[q][q] = r.c;
        j[p][q] = r.s;
        j[q][p] = -r.s;
        let mut out = vec![vec![0.0; n]; n];
        for r_ in 0..n {
            for c_ in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        acc += j[k][r_] * a[k][l] * j[l][c_];
                    }
                }
                out[r_][c_] = acc;
            }
        }
        out
    }

    #[test]
    fn coeffs_equal_diagonal() {
        let r = jacobi_coeffs(2.0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.c, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(r.s, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn coeffs_zero_offdiagonal_is_identity() {
        assert_eq!(
            jacobi_coeffs(3.0, -7.0, 0.0).unwrap(),
            RotationCoeffs::IDENTITY
        );
    }

    #[test]
    fn coeffs_three_four() {
        let r = jacobi_coeffs(3.0, -3.0, 4.0).unwrap();
        assert_abs_diff_eq!((r.s / r.c).abs(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.c, 2.0 / 5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.s.abs(), 1.0 / 5f64.sqrt(), epsilon = 1e-15);
        let m = SymMatrix::from_dense(&[vec![3.0, 4.0], vec![4.0, -3.0]])
            .unwrap()
            .apply_rotation(0, 1, r)
            .unwrap();
        let mut d = m.diagonal();
        d.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(d[0], -5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d[1], 5.0, epsilon = 1e-14);
        assert_eq!(m.get(0, 1), 0.0);
    }

    #[test]
    fn coeffs_reject_nan() {
        assert!(matches!(
            jacobi_coeffs(f64::NAN, 1.0, 1.0),
            Err(Error::NonFinite)
        ));
        assert!(matches!(
            jacobi_coeffs(1.0, 1.0, f64::INFINITY),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn rotation_of_two_by_two() {
        let a = SymMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = jacobi_coeffs(2.0, 2.0, 1.0).unwrap();
        let m = a.apply_rotation(0, 1, r).unwrap();
        let mut d = m.diagonal();
        d.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d[1], 3.0, epsilon = 1e-14);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn identity_rotation_on_diagonal_matrix() {
        let a = SymMatrix::from_fn(4, |i, j| if i == j { i as f64 + 1.0 } else { 0.0 });
        let b = a
            .clone()
            .apply_rotation(1, 3, RotationCoeffs::IDENTITY)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rotation_index_errors() {
        let mut a = SymMatrix::identity(3);
        assert!(matches!(
            a.rotate(0, 3, RotationCoeffs::IDENTITY),
            Err(Error::IndexOutOfRange { index: 3, dim: 3 })
        ));
        assert!(matches!(
            a.rotate(1, 1, RotationCoeffs::IDENTITY),
            Err(Error::DegeneratePlane(1))
        ));
    }

    #[test]
    fn swapped_plane_is_same_rotation() {
        let a = SymMatrix::from_fn(5, |i, j| {
            ((i * 7 + j * 3) % 5) as f64 - 1.5 + (i == j) as u8 as f64
        });
        let r = jacobi_coeffs(a.get(1, 1), a.get(3, 3), a.get(1, 3)).unwrap();
        let x = a.clone().apply_rotation(1, 3, r).unwrap();
        let y = a.apply_rotation(3, 1, r.swapped()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_abs_diff_eq!(x.get(i, j), y.get(i, j), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn psd_sqrt_fixtures() {
        let id = psd_sqrt(&SymMatrix::identity(3), 1e-12).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(id.get(i, j), (i == j) as u8 as f64, epsilon = 1e-14);
            }
        }
        let d = psd_sqrt(
            &SymMatrix::from_dense(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap(),
            1e-12,
        )
        .unwrap();
        assert_abs_diff_eq!(d.get(0, 0), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.get(1, 1), 3.0, epsilon = 1e-14);
        assert_eq!(d.get(0, 1), 0.0);

        let s = psd_sqrt(
            &SymMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            1e-12,
        )
        .unwrap();
        let r3 = 3f64.sqrt();
        assert_abs_diff_eq!(s.get(0, 0), (r3 + 1.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(1, 1), (r3 + 1.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(0, 1), (r3 - 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let k = SymMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(psd_sqrt(&k, 1e-9), Err(Error::NotPsd(v)) if (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn from_dense_rejects_asymmetry() {
        assert!(SymMatrix::from_dense(&[vec![1.0, 2.0], vec![2.5, 1.0]]).is_err());
        assert!(SymMatrix::from_dense(&[vec![1.0, 2.0]]).is_err());
    }

    fn sym_strategy(n: usize) -> impl Strategy<Value = SymMatrix> {
        proptest::collection::vec(-1.0f64..1.0, n * (n + 1) / 2)
            .prop_map(move |d| SymMatrix::from_packed(n, d).unwrap())
    }

    proptest! {
        #[test]
        fn coeffs_are_unit(a in -1e6f64..1e6, d in -1e6f64..1e6, m in -1e6f64..1e6) {
            let r = jacobi_coeffs(a, d, m).unwrap();
            prop_assert!((r.c * r.c + r.s * r.s - 1.0).abs() <= 1e-12);
            prop_assert!(r.c > 0.0);
        }

        #[test]
        fn rotation_matches_dense_product(a in sym_strategy(6), p in 0usize..6, q in 0usize..6) {
            prop_assume!(p != q);
            let r = jacobi_coeffs(a.get(p, p), a.get(q, q), a.get(p, q)).unwrap();
            let expect = dense_jt_a_j(&a.to_dense(), p, q, r);
            let got = a.clone().apply_rotation(p, q, r).unwrap();
            prop_assert_eq!(got.get(p, q), 0.0);
            prop_assert!(expect[p][q].abs() < 1e-12);
            for i in 0..6 {
                for j in 0..6 {
                    prop_assert!((got.get(i, j) - expect[i][j]).abs() < 1e-12);
                }
            }
            prop_assert!((got.trace() - a.trace()).abs() <= 1e-10 * a.frobenius_norm().max(1.0));
        }
    }
}
