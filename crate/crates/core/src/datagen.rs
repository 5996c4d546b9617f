//! Seeded two-dimensional benchmark shapes.
//!
//! Circles and moons place points at evenly spaced angles and then add
//! isotropic Gaussian noise, so the zero-noise case lies exactly on the
//! curves. Draw order: points are produced component by component; each
//! point consumes one Box–Muller pair (x noise, y noise), except `Uniform`,
//! which consumes two uniforms (x, y).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::ClusterLabels;
use crate::kernels::Dataset;
use crate::rng::{self, KtRng};

pub const DEFAULT_NOISE: f64 = 0.05;
pub const DEFAULT_FACTOR: f64 = 0.5;
pub const DEFAULT_CENTERS: [[f64; 2]; 3] = [[-5.0, -4.0], [0.0, 4.0], [5.0, -2.0]];
pub const DEFAULT_ANISO_TRANSFORM: [[f64; 2]; 2] = [[0.6, -0.6], [-0.4, 0.8]];
pub const DEFAULT_VARIED_STDS: [f64; 3] = [1.0, 2.5, 0.5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    /// Two concentric circles of radius 1 and `factor`.
    Circles { factor: f64, noise: f64 },
    /// Two interleaving half circles.
    Moons { noise: f64 },
    /// Isotropic Gaussian blobs, one std per center.
    Blobs {
        centers: Vec<[f64; 2]>,
        stds: Vec<f64>,
    },
    /// Unit-std blobs mapped through `x ↦ x·T` (row-vector convention).
    Aniso {
        centers: Vec<[f64; 2]>,
        transform: [[f64; 2]; 2],
    },
    /// Blobs with differing spreads.
    Varied {
        centers: Vec<[f64; 2]>,
        stds: Vec<f64>,
    },
    /// Uniform on the unit square.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    #[serde(flatten)]
    pub shape: Shape,
    pub n: usize,
    pub seed: u64,
}

pub struct Generated {
    pub data: Dataset,
    pub labels: ClusterLabels,
}

impl ShapeSpec {
    pub fn circles(factor: f64, noise: f64, n: usize, seed: u64) -> Self {
        ShapeSpec {
            shape: Shape::Circles { factor, noise },
            n,
            seed,
        }
    }

    pub fn moons(noise: f64, n: usize, seed: u64) -> Self {
        ShapeSpec {
            shape: Shape::Moons { noise },
            n,
            seed,
        }
    }

    pub fn blobs(centers: Vec<[f64; 2]>, stds: Vec<f64>, n: usize, seed: u64) -> Self {
        ShapeSpec {
            shape: Shape::Blobs { centers, stds },
            n,
            seed,
        }
    }

    pub fn aniso(n: usize, seed: u64) -> Self {
        ShapeSpec {
            shape: Shape::Aniso {
                centers: DEFAULT_CENTERS.to_vec(),
                transform: DEFAULT_ANISO_TRANSFORM,
            },
            n,
            seed,
        }
    }

    pub fn varied(n: usize, seed: u64) -> Self {
        ShapeSpec {
            shape: Shape::Varied {
                centers: DEFAULT_CENTERS.to_vec(),
                stds: DEFAULT_VARIED_STDS.to_vec(),
            },
            n,
            seed,
        }
    }

    pub fn uniform(n: usize, seed: u64) -> Self {
        ShapeSpec {
            shape: Shape::Uniform,
            n,
            seed,
        }
    }

    /// Shape by name with default parameters.
    pub fn named(name: &str, n: usize, seed: u64) -> Result<Self> {
        Ok(match name {
            "circles" => Self::circles(DEFAULT_FACTOR, DEFAULT_NOISE, n, seed),
            "moons" => Self::moons(DEFAULT_NOISE, n, seed),
            "blobs" => Self::blobs(DEFAULT_CENTERS.to_vec(), vec![1.0; 3], n, seed),
            "aniso" => Self::aniso(n, seed),
            "varied" => Self::varied(n, seed),
            "uniform" => Self::uniform(n, seed),
            other => {
                return Err(Error::InvalidParameter(format!("unknown shape '{other}'")));
            }
        })
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        match &self.shape {
            Shape::Circles { factor, noise } => {
                if !(*factor > 0.0 && *factor < 1.0) {
                    return bad("circle factor must lie in (0, 1)");
                }
                if !(*noise >= 0.0) {
                    return bad("noise must be non-negative");
                }
            }
            Shape::Moons { noise } if !(*noise >= 0.0) => return bad("noise must be non-negative"),
            Shape::Blobs { centers, stds } | Shape::Varied { centers, stds } => {
                if centers.is_empty() || centers.len() != stds.len() {
                    return bad("need one std per blob center");
                }
                if stds.iter().any(|s| !(*s >= 0.0)) {
                    return bad("blob stds must be non-negative");
                }
            }
            Shape::Aniso { centers, .. } if centers.is_empty() => return bad("need a blob center"),
            _ => {}
        }
        Ok(())
    }
}

/// Sizes of `k` components as balanced as possible.
fn split(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|c| n / k + usize::from(c < n % k)).collect()
}

fn noisy(rng: &mut KtRng, x: f64, y: f64, noise: f64) -> [f64; 2] {
    let (zx, zy) = rng::normal_pair(rng);
    [x + noise * zx, y + noise * zy]
}

pub fn generate(spec: &ShapeSpec) -> Result<Generated> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let n = spec.n;
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(n);
    let mut labels: Vec<usize> = Vec::with_capacity(n);

    match &spec.shape {
        Shape::Circles { factor, noise } => {
            for (c, (m, radius)) in split(n, 2).into_iter().zip([1.0, *factor]).enumerate() {
                for i in 0..m {
                    let theta = 2.0 * PI * i as f64 / m as f64;
                    points.push(noisy(
                        &mut rng,
                        radius * theta.cos(),
                        radius * theta.sin(),
                        *noise,
                    ));
                    labels.push(c);
                }
            }
        }
        Shape::Moons { noise } => {
            for (c, m) in split(n, 2).into_iter().enumerate() {
                for i in 0..m {
                    let theta = if m > 1 {
                        PI * i as f64 / (m - 1) as f64
                    } else {
                        0.0
                    };
                    let (x, y) = if c == 0 {
                        (theta.cos(), theta.sin())
                    } else {
                        (1.0 - theta.cos(), 0.5 - theta.sin())
                    };
                    points.push(noisy(&mut rng, x, y, *noise));
                    labels.push(c);
                }
            }
        }
        Shape::Blobs { centers, stds } | Shape::Varied { centers, stds } => {
            for (c, m) in split(n, centers.len()).into_iter().enumerate() {
                for _ in 0..m {
                    points.push(noisy(&mut rng, centers[c][0], centers[c][1], stds[c]));
                    labels.push(c);
                }
            }
        }
        Shape::Aniso { centers, transform } => {
            for (c, m) in split(n, centers.len()).into_iter().enumerate() {
                for _ in 0..m {
                    let [x, y] = noisy(&mut rng, centers[c][0], centers[c][1], 1.0);
                    points.push([
                        x * transform[0][0] + y * transform[1][0],
                        x * transform[0][1] + y * transform[1][1],
                    ]);
                    labels.push(c);
                }
            }
        }
        Shape::Uniform => {
            use rand::Rng;
            for _ in 0..n {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                points.push([x, y]);
                labels.push(0);
            }
        }
    }

    let values = points.iter().flatten().copied().collect();
    Ok(Generated {
        data: Dataset::new(n, 2, values, vec![true; 2 * n])?,
        labels: ClusterLabels::from_raw(&labels),
    })
}
