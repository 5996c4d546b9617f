//! Kernel configurations, data containers, Gram matrices and SPSD checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::par;

/// Kernel configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// `exp(-‖x − y‖² / 2σ²)`
    Rbf { sigma: f64 },
    /// `⟨x, y⟩`
    Linear,
    /// `(α⟨x, y⟩ + c₀)^r`
    Polynomial { alpha: f64, c0: f64, r: u32 },
    /// `exp(-(γ/|E|) Σ_{i∈E} (u_i − v_i)²)` over the attributes `E` observed in both rows.
    MissingRbf { gamma: f64 },
    /// `diag` on the diagonal, 1 between adjacent vertices, 0 otherwise.
    GraphAdjacency { diag: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match *self {
            KernelSpec::Rbf { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                bad("rbf sigma must be positive")
            }
            KernelSpec::MissingRbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                bad("missing-rbf gamma must be positive")
            }
            KernelSpec::Polynomial { r: 0, .. } => bad("polynomial degree must be at least 1"),
            KernelSpec::Polynomial { alpha, c0, .. } if !(alpha.is_finite() && c0.is_finite()) => {
                bad("polynomial coefficients must be finite")
            }
            KernelSpec::GraphAdjacency { diag } if !(diag > 0.0 && diag.is_finite()) => {
                bad("graph diagonal must be positive")
            }
            _ => Ok(()),
        }
    }

    /// Graph kernel whose diagonal is the largest vertex degree (at least 1),
    /// which makes the Gram matrix diagonally dominant.
    pub fn graph_max_degree(graph: &Graph) -> Self {
        KernelSpec::GraphAdjacency {
            diag: graph.max_degree().max(1) as f64,
        }
    }

    pub fn is_graph(&self) -> bool {
        matches!(self, KernelSpec::GraphAdjacency { .. })
    }

    /// Evaluates a numeric kernel on two fully observed vectors.
    pub fn eval_vectors(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        match *self {
            KernelSpec::Rbf { sigma } => {
                Ok((-squared_distance(x, y) / (2.0 * sigma * sigma)).exp())
            }
            KernelSpec::Linear => Ok(dot(x, y)),
            KernelSpec::Polynomial { alpha, c0, r } => Ok((alpha * dot(x, y) + c0).powi(r as i32)),
            KernelSpec::MissingRbf { gamma } => {
                if x.is_empty() {
                    return Err(Error::NoSharedAttributes(0, 0));
                }
                Ok((-gamma * squared_distance(x, y) / x.len() as f64).exp())
            }
            KernelSpec::GraphAdjacency { .. } => Err(Error::InvalidParameter(
                "graph kernel needs vertex observations".into(),
            )),
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Anything a kernel can be evaluated on by item index.
pub trait Observations: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rejects kernels that cannot be used with this kind of data.
    fn check_kernel(&self, spec: &KernelSpec) -> Result<()>;

    fn kernel(&self, spec: &KernelSpec, i: usize, j: usize) -> Result<f64>;
}

/// Numeric table with a presence mask (`true` = observed).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
    present: Vec<bool>,
}

impl Dataset {
    /// Builds a dataset from row-major values and mask. Missing cells are stored as NaN.
    pub fn new(n: usize, p: usize, mut values: Vec<f64>, present: Vec<bool>) -> Result<Self> {
        if values.len() != n * p || present.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                found: values.len().min(present.len()),
            });
        }
        for i in 0..n {
            let mask = &present[i * p..(i + 1) * p];
            if !mask.iter().any(|&m| m) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has no observed attributes"
                )));
            }
            for (j, &m) in mask.iter().enumerate() {
                let v = &mut values[i * p + j];
                if m && !v.is_finite() {
                    return Err(Error::NonFinite);
                }
                if !m {
                    *v = f64::NAN;
                }
            }
        }
        Ok(Dataset {
            n,
            p,
            values,
            present,
        })
    }

    /// Fully observed dataset from rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let present = vec![true; values.len()];
        Self::new(rows.len(), p, values, present)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn mask(&self, i: usize) -> &[bool] {
        &self.present[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.present[i * self.p + j].then(|| self.values[i * self.p + j])
    }

    pub fn is_complete(&self) -> bool {
        self.present.iter().all(|&m| m)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn present(&self) -> &[bool] {
        &self.present
    }

    /// Keeps the given rows in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.p);
        let mut present = Vec::with_capacity(rows.len() * self.p);
        for &r in rows {
            values.extend_from_slice(self.row(r));
            present.extend_from_slice(self.mask(r));
        }
        Dataset {
            n: rows.len(),
            p: self.p,
            values,
            present,
        }
    }

    /// Missing-data RBF between two rows.
    pub fn missing_rbf(&self, gamma: f64, i: usize, j: usize) -> Result<f64> {
        let (u, um) = (self.row(i), self.mask(i));
        let (v, vm) = (self.row(j), self.mask(j));
        let mut shared = 0usize;
        let mut sum = 0.0;
        for k in 0..self.p {
            if um[k] && vm[k] {
                shared += 1;
                let d = u[k] - v[k];
                sum += d * d;
            }
        }
        if shared == 0 {
            return Err(Error::NoSharedAttributes(i.min(j), i.max(j)));
        }
        Ok((-gamma * sum / shared as f64).exp())
    }
}

impl Observations for Dataset {
    fn len(&self) -> usize {
        self.n
    }

    fn check_kernel(&self, spec: &KernelSpec) -> Result<()> {
        spec.validate()?;
        match spec {
            KernelSpec::GraphAdjacency { .. } => Err(Error::InvalidParameter(
                "graph kernel cannot be applied to tabular data".into(),
            )),
            KernelSpec::MissingRbf { .. } => Ok(()),
            _ if !self.is_complete() => Err(Error::InvalidParameter(
                "data has missing values; use the missing-rbf kernel".into(),
            )),
            _ => Ok(()),
        }
    }

    fn kernel(&self, spec: &KernelSpec, i: usize, j: usize) -> Result<f64> {
        match *spec {
            KernelSpec::MissingRbf { gamma } => self.missing_rbf(gamma, i, j),
            _ => spec.eval_vectors(self.row(i), self.row(j)),
        }
    }
}

/// Undirected, unweighted simple graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    n_edges: usize,
    ids: Option<Vec<u64>>,
}

impl Graph {
    /// Collapses duplicates and reversed pairs. Self-loops are rejected.
    pub fn from_edges(
        n_vertices: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n_vertices];
        for (u, v) in edges {
            for w in [u, v] {
                if w >= n_vertices {
                    return Err(Error::IndexOutOfRange {
                        index: w,
                        dim: n_vertices,
                    });
                }
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut n_edges = 0;
        for list in adjacency.iter_mut() {
            list.sort_unstable();
            list.dedup();
            n_edges += list.len();
        }
        Ok(Graph {
            adjacency,
            n_edges: n_edges / 2,
            ids: None,
        })
    }

    /// Attaches the original vertex identifiers (vertex `v` was called `ids[v]`).
    pub fn with_ids(mut self, ids: Vec<u64>) -> Self {
        self.ids = Some(ids);
        self
    }

    pub fn ids(&self) -> Option<&[u64]> {
        self.ids.as_deref()
    }

    pub fn n_vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }
}

impl Observations for Graph {
    fn len(&self) -> usize {
        self.n_vertices()
    }

    fn check_kernel(&self, spec: &KernelSpec) -> Result<()> {
        spec.validate()?;
        match *spec {
            KernelSpec::GraphAdjacency { diag } => {
                let max = self.max_degree();
                if diag < max as f64 {
                    return Err(Error::InvalidParameter(format!(
                        "graph diagonal {diag} is below the maximum degree {max}"
                    )));
                }
                Ok(())
            }
            _ => Err(Error::InvalidParameter(
                "graph data needs the graph kernel".into(),
            )),
        }
    }

    fn kernel(&self, spec: &KernelSpec, i: usize, j: usize) -> Result<f64> {
        match *spec {
            KernelSpec::GraphAdjacency { diag } => Ok(if i == j {
                diag
            } else if self.is_adjacent(i, j) {
                1.0
            } else {
                0.0
            }),
            _ => Err(Error::InvalidParameter(
                "graph data needs the graph kernel".into(),
            )),
        }
    }
}

/// Kernel matrix `K(S, S)` over the given item indices.
///
/// Each unordered pair is evaluated once; rows may be computed in parallel,
/// which does not change any output value.
pub fn gram<O: Observations + ?Sized>(
    spec: &KernelSpec,
    data: &O,
    indices: &[usize],
) -> Result<SymMatrix> {
    data.check_kernel(spec)?;
    let n = data.len();
    let mut seen = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, dim: n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidParameter(format!("duplicate index {i}")));
        }
    }
    let rows: Vec<Result<Vec<f64>>> = par::map(indices.len(), |r| {
        (0..=r)
            .map(|c| data.kernel(spec, indices[r], indices[c]))
            .collect()
    });
    let m = indices.len();
    let mut packed = Vec::with_capacity(m * (m + 1) / 2);
    for row in rows {
        packed.extend(row?);
    }
    SymMatrix::from_packed(m, packed)
}

/// Outcome of [`check_spsd`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpsdReport {
    pub symmetric: bool,
    /// Gershgorin bound `min_i (K_ii − Σ_{j≠i} |K_ij|)`.
    pub min_eigenvalue_lower_bound: f64,
    pub diagonally_dominant: bool,
}

/// Gershgorin sufficiency check; advisory only.
pub fn check_spsd(k: &SymMatrix, tol: f64) -> SpsdReport {
    let n = k.dim();
    let mut bound = f64::INFINITY;
    let mut dominant = true;
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| k.get(i, j).abs()).sum();
        let d = k.get(i, i);
        bound = bound.min(d - off);
        if d + tol < off {
            dominant = false;
        }
    }
    SpsdReport {
        symmetric: k.is_finite(),
        min_eigenvalue_lower_bound: if n == 0 { 0.0 } else { bound },
        diagonally_dominant: dominant,
    }
}
