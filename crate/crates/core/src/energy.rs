//! Ginzburg-Landau energy, fidelity term and the convex split `F = P1 - P2`
//! with
//!
//! ```text
//! P1(u) = (eps/2) <u, L u> + (eta/2) |u - y|^2_Lambda + (c/2) |u|^2
//! P2(u) = (c/2) |u|^2 - (1/eps) sum_i (u_i^2 - 1)^2 / 4
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianOp;
use crate::linalg::{par_sum_by, CHUNK};

/// Relaxed label vector `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelField(Vec<f64>);

impl LabelField {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("label {i} is not finite")));
        }
        Ok(LabelField(u))
    }

    pub fn constant(n: usize, v: f64) -> Self {
        LabelField(vec![v; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Binary view, `sign(0) = +1`.
    pub fn thresholded(&self) -> Vec<i8> {
        threshold(&self.0)
    }
}

pub fn threshold(u: &[f64]) -> Vec<i8> {
    u.iter().map(|&v| if v >= 0.0 { 1 } else { -1 }).collect()
}

/// Known labels `y` on the fidelity support (`lambda_i = 1`), zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorField {
    y: Vec<f64>,
    lambda: Vec<f64>,
}

impl PriorField {
    /// `lambda` entries must be 0 or 1; `y` must be +-1 on the support and
    /// 0 off it.
    pub fn new(y: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        Error::check_len("PriorField", y.len(), lambda.len())?;
        for (i, (&yi, &li)) in y.iter().zip(&lambda).enumerate() {
            let ok = (li == 1.0 && (yi == 1.0 || yi == -1.0)) || (li == 0.0 && yi == 0.0);
            if !ok {
                return Err(Error::InvalidParameter(format!(
                    "prior entry {i} has y = {yi}, lambda = {li}"
                )));
            }
        }
        Ok(PriorField { y, lambda })
    }

    pub fn empty(n: usize) -> Self {
        PriorField {
            y: vec![0.0; n],
            lambda: vec![0.0; n],
        }
    }

    /// Prior from `(node, label)` pairs with labels `+1` / `-1`.
    pub fn from_labels(n: usize, labels: &[(usize, i8)]) -> Result<Self> {
        let mut p = Self::empty(n);
        for &(i, l) in labels {
            if i >= n {
                return Err(Error::InvalidParameter(format!("prior node {i} out of range")));
            }
            if l != 1 && l != -1 {
                return Err(Error::InvalidParameter(format!("prior label must be +-1, got {l}")));
            }
            p.y[i] = l as f64;
            p.lambda[i] = 1.0;
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Number of nodes with a known label.
    pub fn support_size(&self) -> usize {
        self.lambda.iter().filter(|&&l| l == 1.0).count()
    }

    /// The same prior with every label flipped.
    pub fn negated(&self) -> Self {
        PriorField {
            y: self.y.iter().map(|v| -v).collect(),
            lambda: self.lambda.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Diffuse interface parameter.
    pub epsilon: f64,
    /// Fidelity weight.
    pub eta: f64,
    /// Convex split constant.
    pub convex_shift: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            epsilon: 100.0,
            eta: 100.0,
            convex_shift: 11.0,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be >= 0, got {}", self.eta)));
        }
        if !(self.convex_shift > 0.0 && self.convex_shift.is_finite()) {
            return Err(Error::InvalidParameter(format!("c must be > 0, got {}", self.convex_shift)));
        }
        Ok(())
    }

    /// Largest `|u_i|` for which `P2` is convex: `c >= (3 u^2 - 1) / eps`.
    pub fn convexity_bound(&self) -> f64 {
        ((self.convex_shift * self.epsilon + 1.0) / 3.0).sqrt()
    }
}

/// `(x^2 - 1)^2 / 4`
#[inline]
pub fn double_well(x: f64) -> f64 {
    let t = x * x - 1.0;
    0.25 * t * t
}

/// `sum_i W(u_i) / eps`
pub fn big_w(u: &[f64], epsilon: f64) -> f64 {
    par_sum_by(u.len(), |i| double_well(u[i])) / epsilon
}

fn fidelity(u: &[f64], prior: &PriorField) -> f64 {
    let (y, l) = (prior.targets(), prior.lambda());
    par_sum_by(u.len(), |i| {
        let d = u[i] - y[i];
        l[i] * d * d
    })
}

fn check_dims(u: &[f64], l: &LaplacianOp, prior: &PriorField) -> Result<()> {
    Error::check_len("energy: laplacian vs u", l.num_nodes(), u.len())?;
    Error::check_len("energy: prior vs u", prior.len(), u.len())
}

/// `F(u) = (eps/2) <u, L u> + W(u) + (eta/2) |u - y|^2_Lambda`
pub fn total_energy(u: &[f64], l: &LaplacianOp, prior: &PriorField, p: &EnergyParams) -> Result<f64> {
    check_dims(u, l, prior)?;
    Ok(0.5 * p.epsilon * l.quadratic_form(u)? + big_w(u, p.epsilon) + 0.5 * p.eta * fidelity(u, prior))
}

/// `grad F = eps L u + (u^3 - u) / eps + eta Lambda (u - y)`
pub fn grad_total(u: &[f64], l: &LaplacianOp, prior: &PriorField, p: &EnergyParams) -> Result<Vec<f64>> {
    check_dims(u, l, prior)?;
    let mut g = l.apply(u);
    let (y, lam) = (prior.targets(), prior.lambda());
    g.par_iter_mut()
        .with_min_len(CHUNK)
        .enumerate()
        .for_each(|(i, gi)| {
            let x = u[i];
            *gi = p.epsilon * *gi + (x * x * x - x) / p.epsilon + p.eta * lam[i] * (x - y[i]);
        });
    Ok(g)
}

/// Gradient of `P2`: `xi = c u - (u^3 - u) / eps`.
pub fn xi_subgradient(u: &[f64], p: &EnergyParams) -> Vec<f64> {
    u.par_iter()
        .with_min_len(CHUNK)
        .map(|&x| p.convex_shift * x - (x * x * x - x) / p.epsilon)
        .collect()
}

pub fn p1_value(u: &[f64], l: &LaplacianOp, prior: &PriorField, p: &EnergyParams) -> Result<f64> {
    check_dims(u, l, prior)?;
    let sq = par_sum_by(u.len(), |i| u[i] * u[i]);
    Ok(0.5 * p.epsilon * l.quadratic_form(u)? + 0.5 * p.eta * fidelity(u, prior) + 0.5 * p.convex_shift * sq)
}

pub fn p2_value(u: &[f64], p: &EnergyParams) -> f64 {
    let sq = par_sum_by(u.len(), |i| u[i] * u[i]);
    0.5 * p.convex_shift * sq - big_w(u, p.epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Normalization, SparseSym};

    fn pair(mode: Normalization) -> LaplacianOp {
        LaplacianOp::new(SparseSym::from_edges(2, &[(0, 1, 1.0)]).unwrap(), mode)
    }

    #[test]
    fn double_well_values() {
        assert_eq!(double_well(1.0), 0.0);
        assert_eq!(double_well(-1.0), 0.0);
        assert_eq!(double_well(0.0), 0.25);
    }

    #[test]
    fn big_w_values() {
        assert_eq!(big_w(&[1.0, -1.0, 1.0], 0.3), 0.0);
        assert_eq!(big_w(&[0.0; 8], 1.0), 2.0);
        assert_eq!(big_w(&[0.0, 2.0], 2.0), 1.25);
    }

    #[test]
    fn total_energy_examples() {
        let l = pair(Normalization::Unnormalized);
        let p = EnergyParams { epsilon: 1.0, eta: 2.0, convex_shift: 1.0 };
        let prior = PriorField::from_labels(2, &[(0, 1), (1, 1)]).unwrap();
        assert_eq!(total_energy(&[1.0, 1.0], &l, &prior, &p).unwrap(), 0.0);
        let empty = PriorField::empty(2);
        assert_eq!(total_energy(&[1.0, -1.0], &l, &empty, &p).unwrap(), 2.0);
        // u = 0, y = 1, eta = 2: n/4 + n
        assert_eq!(total_energy(&[0.0, 0.0], &l, &prior, &p).unwrap(), 0.5 + 2.0);
    }

    #[test]
    fn gradient_examples() {
        let l = pair(Normalization::Unnormalized);
        let p = EnergyParams { epsilon: 0.5, eta: 3.0, convex_shift: 1.0 };
        let g = grad_total(&[1.0, 1.0], &l, &PriorField::empty(2), &p).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn single_isolated_node_gradient() {
        // A lone node has no edges; use a weak pair and evaluate node terms
        // by hand: eps L u vanishes for equal entries.
        let l = pair(Normalization::Unnormalized);
        let p = EnergyParams { epsilon: 1.0, eta: 1.0, convex_shift: 1.0 };
        let prior = PriorField::from_labels(2, &[(0, 1), (1, 1)]).unwrap();
        let g = grad_total(&[0.0, 0.0], &l, &prior, &p).unwrap();
        assert_eq!(g, vec![-1.0, -1.0]);
    }

    #[test]
    fn xi_examples() {
        let p = EnergyParams { epsilon: 100.0, eta: 0.0, convex_shift: 11.0 };
        assert_eq!(xi_subgradient(&[0.0, 0.0], &p), vec![0.0, 0.0]);
        assert_eq!(xi_subgradient(&[1.0], &p), vec![11.0]);
        assert!((xi_subgradient(&[2.0], &p)[0] - 21.94).abs() < 1e-12);
    }

    #[test]
    fn split_examples() {
        let l = pair(Normalization::Unnormalized);
        let p = EnergyParams { epsilon: 1.0, eta: 5.0, convex_shift: 3.0 };
        assert_eq!(p2_value(&[0.0; 4], &p), -1.0);
        let prior = PriorField::empty(2);
        assert_eq!(p1_value(&[1.0, 1.0], &l, &prior, &p).unwrap(), 3.0);
        assert_eq!(p2_value(&[1.0, 1.0], &p), 3.0);
    }

    #[test]
    fn prior_invariants() {
        assert!(PriorField::new(vec![1.0, 0.0], vec![1.0, 0.0]).is_ok());
        assert!(PriorField::new(vec![0.5], vec![1.0]).is_err());
        assert!(PriorField::new(vec![1.0], vec![0.0]).is_err());
        assert!(PriorField::from_labels(2, &[(0, 2)]).is_err());
        let p = PriorField::from_labels(3, &[(2, -1)]).unwrap();
        assert_eq!(p.support_size(), 1);
        assert_eq!(p.negated().targets(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn threshold_ties_go_positive() {
        assert_eq!(threshold(&[0.0, -0.0, -1e-300, 2.0]), vec![1, 1, -1, 1]);
    }

    #[test]
    fn convexity_bound_matches_hessian() {
        let p = EnergyParams::default();
        let b = p.convexity_bound();
        assert!((p.convex_shift - (3.0 * b * b - 1.0) / p.epsilon).abs() < 1e-12);
    }
}
