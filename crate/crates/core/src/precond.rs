//! Diagonal feasible preconditioners and the power method.
//!
//! A diagonal `G` is feasible for the system operator `T = eps L + eta Lambda + c I`
//! (or `T_k = I + k T`) when `G - T` is positive definite. With
//! `2D >= L` and `2I >= L_s` the following diagonals qualify:
//!
//! | kind | step `k = inf` | finite `k` |
//! |------|----------------|------------|
//! | damped Jacobi | `2 (eps d + eta Lambda + c)` | `2 (1 + k (eps d + eta Lambda + c))` |
//! | perturbed Jacobi | `2 eps d + eta Lambda + c + delta0` | `1 + k (2 eps d + eta Lambda + c) + delta0` |
//! | Richardson | `eps lambda_max + eta Lambda + c + delta0` | `1 + k (eps lambda_max + eta Lambda + c) + delta0` |
//!
//! For the normalized Laplacian `d` is replaced by 1 and `lambda_max` by
//! the largest eigenvalue of `L_s`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyParams, PriorField};
use crate::error::{Error, Result};
use crate::graph::{DegreeVector, LaplacianOp, Normalization};
use crate::linalg::{dot, norm2, scale_in_place};

pub const DEFAULT_DELTA0: f64 = 1e-6;
pub const DEFAULT_POWER_ITERS: usize = 150;
/// Relative inflation applied to a power-method estimate before it is used
/// in a Richardson preconditioner; the iteration approaches `lambda_max`
/// from below.
pub const LAMBDA_INFLATION: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecondKind {
    DampedJacobi,
    PerturbedJacobi,
    Richardson,
}

impl PrecondKind {
    pub const ALL: [PrecondKind; 3] = [
        PrecondKind::DampedJacobi,
        PrecondKind::PerturbedJacobi,
        PrecondKind::Richardson,
    ];
}

/// Step size of the DC iteration; `Infinite` solves `T u = b` directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    Finite(f64),
    Infinite,
}

impl StepSize {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSize::Finite(k) if !(k > 0.0 && k.is_finite()) => {
                Err(Error::InvalidParameter(format!("step size must be > 0, got {k}")))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for StepSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepSize::Finite(k) => write!(f, "{k}"),
            StepSize::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for StepSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" => Ok(StepSize::Infinite),
            t => {
                let k: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad step size {t:?}")))?;
                let k = StepSize::Finite(k);
                k.validate()?;
                Ok(k)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagPrecond {
    g: Vec<f64>,
    kind: PrecondKind,
    step: StepSize,
    delta0: f64,
}

impl DiagPrecond {
    pub fn diag(&self) -> &[f64] {
        &self.g
    }

    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn step(&self) -> StepSize {
        self.step
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub lambda_max: f64,
    pub iterations: usize,
}

fn seeded_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Power iteration with Rayleigh quotient recorded after each normalized
/// multiplication (entry `t` is the quotient of `L^(t+1) v0`).
pub fn power_method_history(l: &LaplacianOp, iters: usize, seed: u64) -> Result<Vec<f64>> {
    if iters == 0 {
        return Err(Error::InvalidParameter("power method needs at least one iteration".into()));
    }
    let n = l.num_nodes();
    let mut v = seeded_start(n, seed);
    let nv = norm2(&v);
    if nv == 0.0 {
        return Err(Error::Numerical("zero start vector".into()));
    }
    scale_in_place(&mut v, 1.0 / nv);
    let mut w = vec![0.0; n];
    let mut history = Vec::with_capacity(iters);
    l.apply_into(&v, &mut w);
    for _ in 0..iters {
        let nw = norm2(&w);
        if nw == 0.0 {
            return Err(Error::Numerical("power iterate collapsed to zero".into()));
        }
        std::mem::swap(&mut v, &mut w);
        scale_in_place(&mut v, 1.0 / nw);
        l.apply_into(&v, &mut w);
        history.push(dot(&v, &w));
    }
    Ok(history)
}

/// Estimate of the largest eigenvalue of `L` after `iters` normalized
/// multiplications from a seeded uniform `[-1, 1]^n` start.
pub fn power_method(l: &LaplacianOp, iters: usize, seed: u64) -> Result<SpectralEstimate> {
    let h = power_method_history(l, iters, seed)?;
    Ok(SpectralEstimate {
        lambda_max: *h.last().unwrap(),
        iterations: iters,
    })
}

/// Diagonal preconditioner for `T` (`step = Infinite`) or `T_k`.
///
/// `degrees` is only read for the unnormalized damped and perturbed Jacobi
/// kinds. `lambda_max` is required for Richardson and is used as given.
#[allow(clippy::too_many_arguments)]
pub fn build_precond(
    kind: PrecondKind,
    mode: Normalization,
    p: &EnergyParams,
    prior: &PriorField,
    degrees: &DegreeVector,
    step: StepSize,
    delta0: f64,
    lambda_max: Option<f64>,
) -> Result<DiagPrecond> {
    p.validate()?;
    step.validate()?;
    Error::check_len("build_precond degrees", prior.len(), degrees.len())?;
    if !(delta0 >= 0.0 && delta0.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta0 must be >= 0, got {delta0}")));
    }
    let lam_max = match (kind, lambda_max) {
        (PrecondKind::Richardson, None) => {
            return Err(Error::InvalidParameter("Richardson preconditioner needs lambda_max".into()))
        }
        (PrecondKind::Richardson, Some(v)) if !(v > 0.0 && v.is_finite()) => {
            return Err(Error::InvalidParameter(format!("lambda_max must be > 0, got {v}")))
        }
        (_, v) => v.unwrap_or(0.0),
    };
    let d = degrees.as_slice();
    let lambda = prior.lambda();
    let (eps, eta, c) = (p.epsilon, p.eta, p.convex_shift);
    let g: Vec<f64> = (0..prior.len())
        .into_par_iter()
        .map(|i| {
            let di = match mode {
                Normalization::Unnormalized => d[i],
                Normalization::Normalized => 1.0,
            };
            let fid = eta * lambda[i];
            // `core` is the k = inf diagonal without delta0
            let (core, extra) = match kind {
                PrecondKind::DampedJacobi => (2.0 * (eps * di + fid + c), 0.0),
                PrecondKind::PerturbedJacobi => (2.0 * eps * di + fid + c, delta0),
                PrecondKind::Richardson => (eps * lam_max + fid + c, delta0),
            };
            match (kind, step) {
                (_, StepSize::Infinite) => core + extra,
                (PrecondKind::DampedJacobi, StepSize::Finite(k)) => 2.0 + k * core,
                (_, StepSize::Finite(k)) => 1.0 + k * core + extra,
            }
        })
        .collect();
    if let Some(i) = g.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Numerical(format!("preconditioner entry {i} is {}", g[i])));
    }
    Ok(DiagPrecond {
        g,
        kind,
        step,
        delta0,
    })
}
