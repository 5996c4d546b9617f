//! Merge dendrograms built from treelet rotations, and flat cuts.
//!
//! Leaves start as singleton clusters labelled by their own index. Step `k`
//! merges the clusters labelled `alpha_k` and `beta_k` and keeps the label
//! `beta_k`, so after `k` merges the live labels are exactly the scaling
//! indices `S_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treelet::TreeletDecomposition;

/// One merge, serialized as `[step, removed, kept, score]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    from = "(usize, usize, usize, f64)",
    into = "(usize, usize, usize, f64)"
)]
pub struct Merge {
    pub step: usize,
    pub removed: usize,
    pub kept: usize,
    pub score: f64,
}

impl From<(usize, usize, usize, f64)> for Merge {
    fn from((step, removed, kept, score): (usize, usize, usize, f64)) -> Self {
        Merge {
            step,
            removed,
            kept,
            score,
        }
    }
}

impl From<Merge> for (usize, usize, usize, f64) {
    fn from(m: Merge) -> Self {
        (m.step, m.removed, m.kept, m.score)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
    /// Item index of each leaf when the leaves are a sample of a larger set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leaf_ids: Option<Vec<usize>>,
}

/// Flat clustering; ids are `0..n_clusters`, numbered by smallest member.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClusterLabels {
    assignments: Vec<usize>,
    n_clusters: usize,
}

impl ClusterLabels {
    /// Renumbers arbitrary labels by order of first appearance.
    pub fn from_raw<T: Eq + std::hash::Hash + Clone>(raw: &[T]) -> Self {
        let mut ids = std::collections::HashMap::new();
        let assignments = raw
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l.clone()).or_insert(next)
            })
            .collect();
        ClusterLabels {
            assignments,
            n_clusters: ids.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn get(&self, i: usize) -> usize {
        self.assignments[i]
    }

    /// Cluster sizes indexed by cluster id.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

struct Forest {
    parent: Vec<usize>,
}

impl Forest {
    fn new(n: usize) -> Self {
        Forest {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    fn labels(&mut self) -> ClusterLabels {
        let roots: Vec<usize> = (0..self.parent.len()).map(|i| self.find(i)).collect();
        ClusterLabels::from_raw(&roots)
    }
}

/// Dendrogram mirroring the rotation records of a decomposition.
pub fn merge_tree(decomp: &TreeletDecomposition) -> Dendrogram {
    Dendrogram {
        n_leaves: decomp.dim(),
        merges: decomp
            .records()
            .iter()
            .map(|r| Merge {
                step: r.step,
                removed: r.alpha,
                kept: r.beta,
                score: r.score,
            })
            .collect(),
        leaf_ids: None,
    }
}

impl Dendrogram {
    /// Checks that the merges form a valid forest over `n_leaves` labels.
    pub fn new(n_leaves: usize, merges: Vec<Merge>) -> Result<Self> {
        let tree = Dendrogram {
            n_leaves,
            merges,
            leaf_ids: None,
        };
        tree.validate()?;
        Ok(tree)
    }

    pub fn with_leaf_ids(mut self, ids: Vec<usize>) -> Result<Self> {
        if ids.len() != self.n_leaves {
            return Err(Error::DimensionMismatch {
                expected: self.n_leaves,
                found: ids.len(),
            });
        }
        self.leaf_ids = Some(ids);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_leaves;
        let mut live = vec![true; n];
        for (k, m) in self.merges.iter().enumerate() {
            let bad = |msg: String| Err(Error::InvalidParameter(format!("merge {}: {msg}", k + 1)));
            if m.step != k + 1 {
                return bad(format!("step {} out of order", m.step));
            }
            if m.removed >= n || m.kept >= n {
                return bad("label out of range".into());
            }
            if m.removed == m.kept {
                return bad("merges a label with itself".into());
            }
            if !live[m.removed] || !live[m.kept] {
                return bad("label already removed".into());
            }
            live[m.removed] = false;
        }
        if n > 0 && self.merges.len() >= n {
            return Err(Error::InvalidParameter("too many merges".into()));
        }
        if let Some(ids) = &self.leaf_ids {
            if ids.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: ids.len(),
                });
            }
        }
        Ok(())
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn leaf_ids(&self) -> Option<&[usize]> {
        self.leaf_ids.as_deref()
    }

    /// Trees in the forest after all merges.
    pub fn n_roots(&self) -> usize {
        self.n_leaves - self.merges.len()
    }

    /// Live labels after the first `k` merges.
    pub fn live_labels(&self, k: usize) -> Vec<usize> {
        let mut live = vec![true; self.n_leaves];
        for m in &self.merges[..k.min(self.merges.len())] {
            live[m.removed] = false;
        }
        (0..self.n_leaves).filter(|&i| live[i]).collect()
    }

    /// Applies the first `n_merges` merges.
    fn apply(&self, n_merges: usize) -> ClusterLabels {
        let mut forest = Forest::new(self.n_leaves);
        for m in &self.merges[..n_merges] {
            forest.parent[m.removed] = m.kept;
        }
        forest.labels()
    }

    /// Flat clustering with exactly `n_clusters` clusters.
    pub fn cut(&self, n_clusters: usize) -> Result<ClusterLabels> {
        if n_clusters > self.n_leaves {
            return Err(Error::TooManyClusters {
                requested: n_clusters,
                available: self.n_leaves,
            });
        }
        if n_clusters < self.n_roots() || n_clusters == 0 {
            return Err(Error::CutUnreachable {
                requested: n_clusters,
                minimum: self.n_roots(),
            });
        }
        Ok(self.apply(self.n_leaves - n_clusters))
    }

    /// Applies merges in order until the first one scoring below `threshold`.
    pub fn cut_at_score(&self, threshold: f64) -> ClusterLabels {
        let n = self
            .merges
            .iter()
            .position(|m| m.score < threshold)
            .unwrap_or(self.merges.len());
        self.apply(n)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let tree: Dendrogram = serde_json::from_str(s)?;
        tree.validate()?;
        Ok(tree)
    }
}
