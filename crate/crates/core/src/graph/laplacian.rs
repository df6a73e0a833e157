use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sparse::{DegreeVector, SparseSym};
use crate::error::{Error, Result};
use crate::linalg::par_sum_by;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `L = D - W`
    Unnormalized,
    /// `L_s = I - D^{-1/2} W D^{-1/2}`
    Normalized,
}

/// Matrix-free graph Laplacian. Immutable after construction; `apply` is
/// data-parallel over output rows and safe to share across threads.
#[derive(Debug, Clone)]
pub struct LaplacianOp {
    weights: SparseSym,
    degrees: DegreeVector,
    mode: Normalization,
    inv_sqrt_d: Option<Vec<f64>>,
}

const ROW_GRAIN: usize = 256;

impl LaplacianOp {
    pub fn new(weights: SparseSym, mode: Normalization) -> Self {
        let degrees = weights.degrees();
        let inv_sqrt_d = match mode {
            Normalization::Normalized => Some(degrees.as_slice().iter().map(|d| 1.0 / d.sqrt()).collect()),
            Normalization::Unnormalized => None,
        };
        LaplacianOp {
            weights,
            degrees,
            mode,
            inv_sqrt_d,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.weights.num_nodes()
    }

    pub fn mode(&self) -> Normalization {
        self.mode
    }

    pub fn weights(&self) -> &SparseSym {
        &self.weights
    }

    pub fn degrees(&self) -> &DegreeVector {
        &self.degrees
    }

    /// `d^{-1/2}` when normalized.
    pub fn inv_sqrt_degrees(&self) -> Option<&[f64]> {
        self.inv_sqrt_d.as_deref()
    }

    /// Diagonal of the operator: `d_i` (unnormalized) or `1` (normalized).
    pub fn diagonal(&self) -> Vec<f64> {
        match self.mode {
            Normalization::Unnormalized => self.degrees.as_slice().to_vec(),
            Normalization::Normalized => vec![1.0; self.num_nodes()],
        }
    }

    /// `out = L u`
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.num_nodes());
        assert_eq!(out.len(), self.num_nodes());
        let w = &self.weights;
        match &self.inv_sqrt_d {
            None => {
                let d = self.degrees.as_slice();
                out.par_iter_mut()
                    .with_min_len(ROW_GRAIN)
                    .enumerate()
                    .for_each(|(i, o)| {
                        let (cols, vals) = w.row(i);
                        let s: f64 = cols.iter().zip(vals).map(|(&j, &v)| v * u[j as usize]).sum();
                        *o = d[i] * u[i] - s;
                    });
            }
            Some(isd) => {
                out.par_iter_mut()
                    .with_min_len(ROW_GRAIN)
                    .enumerate()
                    .for_each(|(i, o)| {
                        let (cols, vals) = w.row(i);
                        let s: f64 = cols
                            .iter()
                            .zip(vals)
                            .map(|(&j, &v)| v * isd[j as usize] * u[j as usize])
                            .sum();
                        *o = u[i] - isd[i] * s;
                    });
            }
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        out
    }

    /// `<u, L u>` evaluated edgewise as `1/2 sum_ij w_ij (x_i - x_j)^2` with
    /// `x = u` (unnormalized) or `x = D^{-1/2} u` (normalized). Every term is
    /// nonnegative, so the result carries no cancellation error.
    pub fn quadratic_form(&self, u: &[f64]) -> Result<f64> {
        Error::check_len("LaplacianOp::quadratic_form", self.num_nodes(), u.len())?;
        let w = &self.weights;
        let s = match &self.inv_sqrt_d {
            None => par_sum_by(self.num_nodes(), |i| {
                let (cols, vals) = w.row(i);
                cols.iter()
                    .zip(vals)
                    .map(|(&j, &v)| {
                        let d = u[i] - u[j as usize];
                        v * d * d
                    })
                    .sum()
            }),
            Some(isd) => par_sum_by(self.num_nodes(), |i| {
                let xi = u[i] * isd[i];
                let (cols, vals) = w.row(i);
                cols.iter()
                    .zip(vals)
                    .map(|(&j, &v)| {
                        let d = xi - u[j as usize] * isd[j as usize];
                        v * d * d
                    })
                    .sum()
            }),
        };
        Ok(0.5 * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> SparseSym {
        SparseSym::from_edges(2, &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn two_node_unnormalized() {
        let l = LaplacianOp::new(pair(), Normalization::Unnormalized);
        let u = [1.0, -1.0];
        assert_eq!(l.apply(&u), vec![2.0, -2.0]);
        assert_eq!(l.quadratic_form(&u).unwrap(), 4.0);
        let lu = l.apply(&u);
        assert_eq!(u[0] * lu[0] + u[1] * lu[1], 4.0);
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let w = SparseSym::from_edges(4, &[(0, 1, 0.3), (1, 2, 1.7), (2, 3, 0.2), (0, 3, 2.5)]).unwrap();
        let l = LaplacianOp::new(w, Normalization::Unnormalized);
        for v in l.apply(&[1.0; 4]) {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn two_node_normalized_spectrum() {
        let l = LaplacianOp::new(pair(), Normalization::Normalized);
        // eigenvectors (1, 1) -> 0 and (1, -1) -> 2
        assert_eq!(l.apply(&[1.0, 1.0]), vec![0.0, 0.0]);
        assert_eq!(l.apply(&[1.0, -1.0]), vec![2.0, -2.0]);
        assert_eq!(l.diagonal(), vec![1.0, 1.0]);
    }

    #[test]
    fn normalized_kernel_is_sqrt_degree() {
        let w = SparseSym::from_edges(3, &[(0, 1, 1.0), (1, 2, 3.0)]).unwrap();
        let l = LaplacianOp::new(w, Normalization::Normalized);
        let v: Vec<f64> = l.degrees().as_slice().iter().map(|d| d.sqrt()).collect();
        for x in l.apply(&v) {
            assert!(x.abs() < 1e-14);
        }
        assert!(l.quadratic_form(&v).unwrap() < 1e-28);
    }
}
