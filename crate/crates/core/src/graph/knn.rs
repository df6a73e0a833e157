use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::sq_dist;
use super::sparse::SparseSym;
use crate::error::{Error, Result};

pub const DEFAULT_LOCAL_SCALING_M: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSource {
    ImagePatch,
    PointCloud,
}

/// `n` feature vectors of equal dimension, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    data: Vec<f64>,
    source: FeatureSource,
}

impl FeatureSet {
    pub fn new(dim: usize, data: Vec<f64>, source: FeatureSource) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("feature dimension must be >= 1".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                context: "FeatureSet rows",
                expected: dim * (data.len() / dim + 1),
                got: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite feature value in point {}",
                k / dim
            )));
        }
        Ok(FeatureSet { dim, data, source })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "FeatureSet::from_points",
                expected: dim,
                got: p.len(),
            });
        }
        Self::new(dim, points.concat(), FeatureSource::PointCloud)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> FeatureSource {
        self.source
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Bandwidth rule for the Gaussian kernel of a KNN graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelScaling {
    /// `exp(-d^2 / sigma^2)`
    Fixed { sigma: f64 },
    /// `exp(-d^2 / (sigma_i sigma_j))`, `sigma_i` the distance from `i` to
    /// its `m`-th nearest neighbor.
    LocalScaling { m: usize },
}

fn by_dist_then_index(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

fn nearest_of(features: &FeatureSet, i: usize, k: usize) -> Vec<(u32, f64)> {
    let n = features.len();
    let pi = features.point(i);
    let mut cand: Vec<(u32, f64)> = (0..n)
        .filter(|&j| j != i)
        .map(|j| (j as u32, sq_dist(pi, features.point(j))))
        .collect();
    if k < cand.len() {
        cand.select_nth_unstable_by(k, by_dist_then_index);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_dist_then_index);
    cand
}

/// Exact `k` nearest neighbors of every point (self excluded), as
/// `(index, squared distance)` sorted by distance, ties by lower index.
pub fn knn_lists(features: &FeatureSet, k: usize) -> Result<Vec<Vec<(u32, f64)>>> {
    let n = features.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "neighbor count must satisfy 1 <= k < n (k = {k}, n = {n})"
        )));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| nearest_of(features, i, k))
        .collect())
}

/// Whether `j` is `i` itself or among the `n_l` nearest neighbors of `i`.
pub fn proximity_knn(i: usize, j: usize, features: &FeatureSet, n_l: usize) -> Result<bool> {
    let n = features.len();
    if n_l == 0 || n_l >= n {
        return Err(Error::InvalidParameter(format!(
            "neighbor count must satisfy 1 <= n_l < n (n_l = {n_l}, n = {n})"
        )));
    }
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!("node index out of range for n = {n}")));
    }
    Ok(i == j || nearest_of(features, i, n_l).iter().any(|&(k, _)| k as usize == j))
}

fn sigmas_from_lists(features: &FeatureSet, lists: &[Vec<(u32, f64)>], m: usize) -> Result<Vec<f64>> {
    let n = features.len();
    let sig: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = lists[i][m - 1].1.sqrt();
            if s > 0.0 {
                return Some(s);
            }
            let pi = features.point(i);
            (0..n)
                .map(|j| sq_dist(pi, features.point(j)))
                .filter(|&d| d > 0.0)
                .min_by(f64::total_cmp)
                .map(f64::sqrt)
        })
        .collect();
    sig.into_iter()
        .map(|s| s.ok_or_else(|| Error::InvalidParameter("all points are identical".into())))
        .collect()
}

/// Adaptive bandwidths: distance from each point to its `m`-th nearest
/// neighbor. A zero distance (duplicates) is replaced by the smallest
/// positive distance from that point.
pub fn local_scaling_sigmas(features: &FeatureSet, m: usize) -> Result<Vec<f64>> {
    let lists = knn_lists(features, m)?;
    sigmas_from_lists(features, &lists, m)
}

/// KNN similarity graph, symmetrized by `w = max(w_ij, w_ji)`.
pub fn build_knn_graph(features: &FeatureSet, n_l: usize, scaling: KernelScaling) -> Result<SparseSym> {
    let n = features.len();
    let k = match scaling {
        KernelScaling::Fixed { sigma } => {
            if !(sigma > 0.0) {
                return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
            }
            n_l
        }
        KernelScaling::LocalScaling { m } => {
            if m == 0 || m >= n {
                return Err(Error::InvalidParameter(format!(
                    "local scaling neighbor must satisfy 1 <= m < n (m = {m}, n = {n})"
                )));
            }
            n_l.max(m)
        }
    };
    let lists = knn_lists(features, k)?;
    let weight: Box<dyn Fn(usize, usize, f64) -> f64 + Sync> = match scaling {
        KernelScaling::Fixed { sigma } => {
            let inv = 1.0 / (sigma * sigma);
            Box::new(move |_, _, d2| (-d2 * inv).exp())
        }
        KernelScaling::LocalScaling { m } => {
            let s = sigmas_from_lists(features, &lists, m)?;
            Box::new(move |i, j, d2| (-d2 / (s[i] * s[j])).exp())
        }
    };
    let rows: Vec<Vec<(u32, f64)>> = lists
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            l[..n_l]
                .iter()
                .map(|&(j, d2)| (j, weight(i, j as usize, d2)))
                .collect()
        })
        .collect();
    SparseSym::from_directed_max(n, &rows)
}
