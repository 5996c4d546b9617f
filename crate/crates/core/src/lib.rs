//! Kernel treelets: hierarchical clustering by running the treelet
//! decomposition on a kernel Gram matrix.
//!
//! The pipeline samples `n_S` items, builds `A₀ = K(S, S)`, repeatedly
//! rotates the most similar pair of active indices with a Jacobi rotation,
//! and records each rotation as a merge. Cutting the resulting dendrogram
//! gives flat clusterings of the sample; a kernelized nearest-neighbour vote
//! extends them to the remaining items.
//!
//! ```
//! use kernel_treelets::{datagen, extend, KernelSpec};
//!
//! let shape = datagen::ShapeSpec::blobs(vec![[0.0, 0.0], [5.0, 5.0]], vec![0.2, 0.2], 40, 3);
//! let generated = datagen::generate(&shape).unwrap();
//! let config = extend::KtConfig::new(KernelSpec::Rbf { sigma: 0.5 }, 40, 2);
//! let fit = extend::fit_predict(&generated.data, &config).unwrap();
//! assert_eq!(fit.labels.n_clusters(), 2);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod eval;
pub mod extend;
pub mod hierarchy;
pub mod io;
pub mod kernels;
pub mod linalg;
mod par;
pub mod rng;
pub mod treelet;

pub use error::{Error, Result};
pub use hierarchy::{ClusterLabels, Dendrogram};
pub use kernels::{Dataset, Graph, KernelSpec, Observations};
pub use linalg::{RotationCoeffs, SymMatrix};
pub use treelet::TreeletDecomposition;
