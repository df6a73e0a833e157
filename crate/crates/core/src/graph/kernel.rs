use crate::error::{Error, Result};

/// Fixed kernel bandwidth `ln(n) + 1` for an `n`-node graph.
pub fn default_bandwidth(n_nodes: usize) -> f64 {
    assert!(n_nodes >= 1, "bandwidth needs at least one node");
    (n_nodes as f64).ln() + 1.0
}

/// Weighted squared distance `sum_n alpha_n (a_n - b_n)^2`.
#[inline]
pub(crate) fn weighted_sq_dist(a: &[f64], b: &[f64], alpha: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(alpha)
        .map(|((x, y), w)| w * (x - y) * (x - y))
        .sum()
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gaussian similarity `exp(-sum_n alpha_n |a_n - b_n|^2 / sigma^2)`.
///
/// Feature vectors are flat; for multi-channel features (patch colors) the
/// weight of each position is repeated once per channel.
pub fn similarity_kernel(a: &[f64], b: &[f64], alpha: &[f64], sigma: f64) -> Result<f64> {
    Error::check_len("similarity_kernel feature", a.len(), b.len())?;
    Error::check_len("similarity_kernel alpha", a.len(), alpha.len())?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    if alpha.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidParameter("alpha weights must be nonnegative".into()));
    }
    Ok((-weighted_sq_dist(a, b, alpha) / (sigma * sigma)).exp())
}
