//! Preconditioned DCA outer loop.
//!
//! Each outer step linearizes the concave part at `u^t`, forms
//! `b = eta Lambda y + xi(u^t)` and runs `s` diagonal preconditioned sweeps
//! on `T u = b` (or on `T_k u = u^t + k b` for a finite step `k`), starting
//! from `u^t`. Any number of feasible sweeps amounts to one proximal step
//! with another feasible preconditioner, so the energy never increases.

use std::io::{Read, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{total_energy, xi_subgradient, EnergyParams, LabelField, PriorField};
use crate::error::{Error, Result};
use crate::graph::{LaplacianOp, Normalization};
use crate::linalg::{norm_inf, par_max_by, CHUNK};
use crate::spectral::{normalize_sign_and_scale, second_eigvec};
use crate::precond::{
    build_precond, power_method, DiagPrecond, PrecondKind, StepSize, DEFAULT_DELTA0, DEFAULT_POWER_ITERS,
    LAMBDA_INFLATION,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingRule {
    /// Run exactly `max_outer` steps (unless an exact fixed point is hit).
    MaxOuter,
    /// Stop once `|u^{t+1} - u^t|_inf / |u^t|_inf < tol` held for `window`
    /// consecutive steps.
    RelChange { tol: f64, window: usize },
    /// Stop once the monitored metric stayed within a band of width `tol`
    /// over the last `window` observations.
    MetricPlateau { tol: f64, window: usize },
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule::RelChange { tol: 1e-5, window: 10 }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StoppingRule::MaxOuter => Ok(()),
            StoppingRule::RelChange { tol, window } | StoppingRule::MetricPlateau { tol, window } => {
                if !(tol > 0.0) || window == 0 {
                    Err(Error::InvalidParameter(format!(
                        "stopping rule needs tol > 0 and window >= 1, got {tol}, {window}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// How the Richardson preconditioner obtains its spectral bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralBound {
    /// Power-method estimate inflated by [`LAMBDA_INFLATION`].
    PowerMethod { iters: usize },
    /// Gershgorin-type bound: 2 (normalized) or `2 max_i d_i`.
    Analytic,
    /// Caller-supplied value, used verbatim.
    Given { lambda_max: f64 },
}

impl Default for SpectralBound {
    fn default() -> Self {
        SpectralBound::PowerMethod {
            iters: DEFAULT_POWER_ITERS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub params: EnergyParams,
    pub step: StepSize,
    pub precond: PrecondKind,
    pub inner_sweeps: usize,
    pub max_outer: usize,
    pub stop: StoppingRule,
    pub delta0: f64,
    pub spectral: SpectralBound,
    /// Seed for the power method start vector.
    pub seed: u64,
    /// Evaluate `F(u^t)` every step (one extra Laplacian product).
    pub track_energy: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            params: EnergyParams::default(),
            step: StepSize::Infinite,
            precond: PrecondKind::Richardson,
            inner_sweeps: 4,
            max_outer: 500,
            stop: StoppingRule::default(),
            delta0: DEFAULT_DELTA0,
            spectral: SpectralBound::default(),
            seed: 0,
            track_energy: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.step.validate()?;
        self.stop.validate()?;
        if self.inner_sweeps == 0 {
            return Err(Error::InvalidParameter("inner_sweeps must be >= 1".into()));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter("max_outer must be >= 1".into()));
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta0 must be > 0, got {}", self.delta0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// 1-based outer step index.
    pub iter: usize,
    /// `F(u^t)` after the step, NaN when energy tracking is off.
    pub energy: f64,
    /// `|b - T u|_inf` at the start of the last inner sweep.
    pub residual: f64,
    pub delta_u: f64,
    /// Seconds since the solve started.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub initial_energy: f64,
    pub records: Vec<TraceRecord>,
    pub inner_sweeps: usize,
    /// Optional per-step metric values reported by a monitor.
    pub metrics: Vec<f64>,
}

impl SolveTrace {
    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn total_sweeps(&self) -> usize {
        self.records.len() * self.inner_sweeps
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.initial_energy).chain(self.records.iter().map(|r| r.energy))
    }

    pub fn seconds(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.seconds)
    }

    /// Zero the wall-clock column so traces compare bitwise.
    pub fn strip_timing(&mut self) {
        for r in &mut self.records {
            r.seconds = 0.0;
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["iter", "energy", "residual", "delta_u", "seconds"])
            .map_err(csv_err)?;
        for r in &self.records {
            out.write_record(&[
                r.iter.to_string(),
                format!("{:e}", r.energy),
                format!("{:e}", r.residual),
                format!("{:e}", r.delta_u),
                format!("{:.6}", r.seconds),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format("csv", format!("{other:?}")),
    }
}

/// The linear system operator `T = eps L + eta Lambda + c I`, or
/// `T_k = I + k T` for a finite step. Never assembled.
pub struct SystemOp<'a> {
    l: &'a LaplacianOp,
    lambda: &'a [f64],
    params: EnergyParams,
    step: StepSize,
}

impl<'a> SystemOp<'a> {
    pub fn new(l: &'a LaplacianOp, prior: &'a PriorField, params: EnergyParams, step: StepSize) -> Result<Self> {
        Error::check_len("SystemOp: prior vs laplacian", l.num_nodes(), prior.len())?;
        Ok(SystemOp {
            l,
            lambda: prior.lambda(),
            params,
            step,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.l.num_nodes()
    }

    /// Finish `out = T u` given `out = L u` on entry.
    fn finish(&self, u: &[f64], out: &mut [f64]) {
        let EnergyParams { epsilon, eta, convex_shift: c } = self.params;
        let lam = self.lambda;
        let scale = match self.step {
            StepSize::Infinite => None,
            StepSize::Finite(k) => Some(k),
        };
        out.par_iter_mut()
            .with_min_len(CHUNK)
            .enumerate()
            .for_each(|(i, o)| {
                let t = epsilon * *o + eta * lam[i] * u[i] + c * u[i];
                *o = match scale {
                    None => t,
                    Some(k) => u[i] + k * t,
                };
            });
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        self.l.apply_into(u, out);
        self.finish(u, out);
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        out
    }
}

/// `T u` (or `T_k u`), matrix-free.
pub fn apply_t(u: &[f64], l: &LaplacianOp, prior: &PriorField, p: &EnergyParams, step: StepSize) -> Result<Vec<f64>> {
    Error::check_len("apply_t", l.num_nodes(), u.len())?;
    Ok(SystemOp::new(l, prior, *p, step)?.apply(u))
}

/// Right-hand side `eta Lambda y + xi(u^t)`, or `u^t + k (...)` for finite `k`.
pub fn rhs(u_t: &[f64], prior: &PriorField, p: &EnergyParams, step: StepSize) -> Result<Vec<f64>> {
    Error::check_len("rhs", prior.len(), u_t.len())?;
    let mut b = xi_subgradient(u_t, p);
    let (y, lam) = (prior.targets(), prior.lambda());
    b.par_iter_mut()
        .with_min_len(CHUNK)
        .enumerate()
        .for_each(|(i, bi)| {
            let v = p.eta * lam[i] * y[i] + *bi;
            *bi = match step {
                StepSize::Infinite => v,
                StepSize::Finite(k) => u_t[i] + k * v,
            };
        });
    Ok(b)
}

/// `s` sweeps of `u <- u + G^{-1} (b - T u)` in place. Returns
/// `|b - T u|_inf` as measured at the start of the final sweep.
pub fn inner_sweeps(u: &mut [f64], b: &[f64], g: &[f64], op: &SystemOp<'_>, s: usize) -> Result<f64> {
    Error::check_len("inner_sweeps: b", u.len(), b.len())?;
    Error::check_len("inner_sweeps: preconditioner", u.len(), g.len())?;
    Error::check_len("inner_sweeps: operator", u.len(), op.num_nodes())?;
    let mut tu = vec![0.0; u.len()];
    let mut residual = 0.0;
    for _ in 0..s {
        op.apply_into(u, &mut tu);
        residual = par_max_by(u.len(), |i| (b[i] - tu[i]).abs());
        u.par_iter_mut()
            .with_min_len(CHUNK)
            .enumerate()
            .for_each(|(i, ui)| *ui += (b[i] - tu[i]) / g[i]);
    }
    Ok(residual)
}

/// What a monitor reports back after each outer step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Observation {
    pub metric: Option<f64>,
    pub halt: bool,
}

pub struct Solver<'a> {
    l: &'a LaplacianOp,
    prior: &'a PriorField,
    config: SolverConfig,
    precond: DiagPrecond,
    op: SystemOp<'a>,
}

/// Resolve the spectral bound used by a Richardson preconditioner.
pub fn richardson_lambda(l: &LaplacianOp, bound: SpectralBound, seed: u64) -> Result<f64> {
    match bound {
        SpectralBound::Given { lambda_max } => Ok(lambda_max),
        SpectralBound::Analytic => Ok(match l.mode() {
            Normalization::Normalized => 2.0,
            Normalization::Unnormalized => 2.0 * l.degrees().as_slice().iter().cloned().fold(0.0, f64::max),
        }),
        SpectralBound::PowerMethod { iters } => Ok(power_method(l, iters, seed)?.lambda_max * LAMBDA_INFLATION),
    }
}

impl<'a> Solver<'a> {
    pub fn new(l: &'a LaplacianOp, prior: &'a PriorField, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        Error::check_len("Solver: prior vs laplacian", l.num_nodes(), prior.len())?;
        let lambda_max = match config.precond {
            PrecondKind::Richardson => Some(richardson_lambda(l, config.spectral, config.seed)?),
            _ => None,
        };
        let precond = build_precond(
            config.precond,
            l.mode(),
            &config.params,
            prior,
            l.degrees(),
            config.step,
            config.delta0,
            lambda_max,
        )?;
        let bound = config.params.convexity_bound();
        if bound < 1.0 {
            log::warn!("c = {} keeps P2 convex only for |u| <= {bound:.3}", config.params.convex_shift);
        }
        let op = SystemOp::new(l, prior, config.params, config.step)?;
        Ok(Solver {
            l,
            prior,
            config,
            precond,
            op,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn precond(&self) -> &DiagPrecond {
        &self.precond
    }

    pub fn system(&self) -> &SystemOp<'a> {
        &self.op
    }

    /// One outer step in place; returns the final inner residual.
    pub fn dca_step(&self, u: &mut [f64]) -> Result<f64> {
        let b = rhs(u, self.prior, &self.config.params, self.config.step)?;
        inner_sweeps(u, &b, self.precond.diag(), &self.op, self.config.inner_sweeps)
    }

    pub fn solve(&self, u0: LabelField) -> Result<(LabelField, SolveTrace)> {
        self.solve_with_monitor(u0, |_, _| Observation::default())
    }

    /// Outer loop; `monitor(iter, u)` is called after every step and may
    /// supply a metric (for `MetricPlateau`) or request a halt.
    pub fn solve_with_monitor<M>(&self, u0: LabelField, mut monitor: M) -> Result<(LabelField, SolveTrace)>
    where
        M: FnMut(usize, &[f64]) -> Observation,
    {
        Error::check_len("solve: u0", self.l.num_nodes(), u0.len())?;
        let mut u = u0.into_vec();
        let p = &self.config.params;
        let energy = |u: &[f64]| -> Result<f64> {
            if self.config.track_energy {
                total_energy(u, self.l, self.prior, p)
            } else {
                Ok(f64::NAN)
            }
        };
        let mut trace = SolveTrace {
            initial_energy: energy(&u)?,
            inner_sweeps: self.config.inner_sweeps,
            ..Default::default()
        };
        let start = Instant::now();
        let mut prev = u.clone();
        let mut prev_energy = trace.initial_energy;
        let mut calm = 0usize;
        for iter in 1..=self.config.max_outer {
            prev.copy_from_slice(&u);
            let residual = self.dca_step(&mut u)?;
            if let Some(node) = u.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    iter,
                    node,
                    value: u[node],
                });
            }
            let delta_u = crate::linalg::dist_inf(&u, &prev);
            let e = energy(&u)?;
            if e > prev_energy + 1e-12 * prev_energy.abs().max(1.0) {
                log::warn!("energy increased at step {iter}: {prev_energy:e} -> {e:e}");
            }
            prev_energy = e;
            trace.records.push(TraceRecord {
                iter,
                energy: e,
                residual,
                delta_u,
                seconds: start.elapsed().as_secs_f64(),
            });
            let obs = monitor(iter, &u);
            if let Some(m) = obs.metric {
                trace.metrics.push(m);
            }
            if obs.halt || delta_u == 0.0 {
                break;
            }
            let done = match self.config.stop {
                StoppingRule::MaxOuter => false,
                StoppingRule::RelChange { tol, window } => {
                    let scale = norm_inf(&prev);
                    let rel = if scale > 0.0 { delta_u / scale } else { delta_u };
                    calm = if rel < tol { calm + 1 } else { 0 };
                    calm >= window
                }
                StoppingRule::MetricPlateau { tol, window } => {
                    let m = &trace.metrics;
                    m.len() >= window && {
                        let tail = &m[m.len() - window..];
                        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
                        hi - lo <= tol
                    }
                }
            };
            if done {
                break;
            }
        }
        log::debug!(
            "solve finished after {} outer steps ({} sweeps)",
            trace.outer_iterations(),
            trace.total_sweeps()
        );
        Ok((LabelField::new(u)?, trace))
    }
}

/// Convenience wrapper around [`Solver`].
pub fn solve(
    l: &LaplacianOp,
    prior: &PriorField,
    config: &SolverConfig,
    u0: LabelField,
) -> Result<(LabelField, SolveTrace)> {
    Solver::new(l, prior, *config)?.solve(u0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitMode {
    FromPrior,
    SecondEigvec,
    Random { seed: u64 },
}

pub fn initialize(mode: InitMode, l: &LaplacianOp, prior: &PriorField) -> Result<LabelField> {
    Error::check_len("initialize", l.num_nodes(), prior.len())?;
    let n = l.num_nodes();
    let u = match mode {
        InitMode::FromPrior => prior
            .targets()
            .iter()
            .zip(prior.lambda())
            .map(|(&y, &lam)| if lam > 0.0 { y } else { 0.0 })
            .collect(),
        InitMode::SecondEigvec => {
            let mut v = second_eigvec(l, 0)?.vector;
            normalize_sign_and_scale(&mut v);
            v
        }
        InitMode::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()
        }
    };
    LabelField::new(u)
}

/// Raw little-endian f64 values behind a u64 length header.
pub fn write_checkpoint<W: Write>(u: &[f64], mut w: W) -> Result<()> {
    w.write_all(&(u.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * u.len());
    for x in u {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Vec<f64>> {
    let mut head = [0u8; 8];
    r.read_exact(&mut head)
        .map_err(|_| Error::format("checkpoint", "missing length header"))?;
    let n = u64::from_le_bytes(head) as usize;
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() != 8 * n {
        return Err(Error::format(
            "checkpoint",
            format!("header says {n} values, found {} bytes", data.len()),
        ));
    }
    Ok(data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
