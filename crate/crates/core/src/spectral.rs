//! Second eigenvector of the normalized Laplacian `L_s`.
//!
//! The first eigenvector `d^{1/2} / |d^{1/2}|` (eigenvalue 0) is known and
//! deflated out explicitly. Two solvers are provided: plain power iteration
//! on `2I - L_s`, which is simple but needs on the order of `1 / lambda_3`
//! steps, and a Lanczos iteration with full reorthogonalization, which is
//! what initialization uses. When the graph has several connected
//! components the eigenvalue 0 is repeated and the result is some unit
//! vector of that eigenspace orthogonal to the first eigenvector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::LaplacianOp;
use crate::linalg::{deflate, dist2, dot, norm2, scale_in_place, CHUNK};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `|L_s v - value v|_2`
    pub residual: f64,
    /// Operator applications spent.
    pub applications: usize,
}

/// Largest Krylov basis kept before restarting.
const MAX_BASIS: usize = 400;
const MAX_RESTARTS: usize = 20;
const CHECK_EVERY: usize = 10;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;

fn first_eigvec(l: &LaplacianOp) -> Result<Vec<f64>> {
    let isd = l
        .inv_sqrt_degrees()
        .ok_or_else(|| Error::InvalidParameter("second eigenvector needs a normalized graph".into()))?;
    if l.num_nodes() < 2 {
        return Err(Error::InvalidParameter("second eigenvector needs at least 2 nodes".into()));
    }
    let mut q: Vec<f64> = isd.iter().map(|&x| 1.0 / x).collect();
    let nq = norm2(&q);
    scale_in_place(&mut q, 1.0 / nq);
    Ok(q)
}

fn random_unit_orthogonal(n: usize, q: &[f64], seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    deflate(&mut v, q);
    let nv = norm2(&v);
    if nv == 0.0 {
        return Err(Error::Numerical("start vector lies in the first eigenspace".into()));
    }
    scale_in_place(&mut v, 1.0 / nv);
    Ok(v)
}

fn residual_of(l: &LaplacianOp, v: &[f64], value: f64) -> f64 {
    let lv = l.apply(v);
    let r: Vec<f64> = lv.iter().zip(v).map(|(a, b)| a - value * b).collect();
    norm2(&r)
}

/// Power iteration on `2I - L_s` restricted to the complement of the first
/// eigenvector; stops when successive unit iterates differ by less than
/// `tol` in 2-norm or after `max_iters` steps.
pub fn second_eigvec_power(l: &LaplacianOp, max_iters: usize, tol: f64, seed: u64) -> Result<EigenPair> {
    let q = first_eigvec(l)?;
    let n = l.num_nodes();
    let mut v = random_unit_orthogonal(n, &q, seed)?;
    let mut w = vec![0.0; n];
    let mut applications = 0;
    for _ in 0..max_iters {
        l.apply_into(&v, &mut w);
        applications += 1;
        w.par_iter_mut()
            .with_min_len(CHUNK)
            .zip(v.par_iter().with_min_len(CHUNK))
            .for_each(|(wi, &vi)| *wi = 2.0 * vi - *wi);
        deflate(&mut w, &q);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Err(Error::Numerical("power iterate collapsed to zero".into()));
        }
        scale_in_place(&mut w, 1.0 / nw);
        let change = dist2(&w, &v);
        std::mem::swap(&mut v, &mut w);
        if change < tol {
            break;
        }
    }
    let lv = l.apply(&v);
    let value = dot(&v, &lv);
    Ok(EigenPair {
        residual: residual_of(l, &v, value),
        value,
        vector: v,
        applications: applications + 1,
    })
}

fn seq_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One classical Gram-Schmidt pass of `w` against `q` and the basis.
fn gram_schmidt_pass(w: &mut [f64], q: &[f64], basis: &[Vec<f64>]) {
    let coef: Vec<f64> = std::iter::once(q)
        .chain(basis.iter().map(Vec::as_slice))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|b| seq_dot(w, b))
        .collect();
    w.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let lo = c * CHUNK;
        for (k, wi) in chunk.iter_mut().enumerate() {
            let i = lo + k;
            let mut s = coef[0] * q[i];
            for (b, ck) in basis.iter().zip(&coef[1..]) {
                s += ck * b[i];
            }
            *wi -= s;
        }
    });
}

/// Orthogonalize `w` against `q` and the basis; a second pass runs when
/// the first removed most of `w` (the usual twice-is-enough test).
fn reorthogonalize(w: &mut [f64], q: &[f64], basis: &[Vec<f64>]) {
    let before = norm2(w);
    gram_schmidt_pass(w, q, basis);
    if norm2(w) < 0.7 * before {
        gram_schmidt_pass(w, q, basis);
    }
}

/// Number of eigenvalues of the tridiagonal `(alpha, beta)` below `x`
/// (Sturm count).
fn count_below(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0f64;
    for i in 0..alpha.len() {
        let off = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        let prev = if q == 0.0 { f64::EPSILON * (off.abs() + 1.0) } else { q };
        q = alpha[i] - x - off / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest Ritz pair of the tridiagonal `(alpha, beta)`: value by
/// bisection, coefficient vector by inverse iteration.
fn smallest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    // Gershgorin interval
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < m { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    while hi - lo > 4.0 * f64::EPSILON * scale {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(alpha, beta, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    // inverse iteration with a slightly perturbed shift
    let shift = theta - 8.0 * f64::EPSILON * scale;
    let mut x = vec![1.0 / (m as f64).sqrt(); m];
    for _ in 0..3 {
        x = tridiag_solve(alpha, beta, shift, &x);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
    }
    (theta, x)
}

/// Solve `(T - shift I) x = rhs` by Gaussian elimination with partial
/// pivoting on the tridiagonal.
fn tridiag_solve(alpha: &[f64], beta: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let m = alpha.len();
    // rows as (sub, diag, sup, sup2) after pivoting
    let mut d: Vec<f64> = alpha.iter().map(|a| a - shift).collect();
    let mut up: Vec<f64> = (0..m).map(|i| if i + 1 < m { beta[i] } else { 0.0 }).collect();
    let mut up2 = vec![0.0; m];
    let mut b = rhs.to_vec();
    let tiny = f64::EPSILON * alpha.iter().chain(beta).fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..m.saturating_sub(1) {
        let sub = beta[i];
        if sub.abs() > d[i].abs() {
            // swap rows i and i+1
            let (nd, nu, nu2) = (sub, d[i + 1] , if i + 2 < m { beta[i + 1] } else { 0.0 });
            let (od, ou, ou2) = (d[i], up[i], up2[i]);
            d[i] = nd;
            up[i] = nu;
            up2[i] = nu2;
            b.swap(i, i + 1);
            let f = od / nd;
            d[i + 1] = ou - f * nu;
            up[i + 1] = ou2 - f * nu2;
            b[i + 1] -= f * b[i];
        } else {
            let piv = if d[i] == 0.0 { tiny } else { d[i] };
            d[i] = piv;
            let f = sub / piv;
            d[i + 1] -= f * up[i];
            b[i + 1] -= f * b[i];
        }
    }
    if d[m - 1] == 0.0 {
        d[m - 1] = tiny;
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = b[i];
        if i + 1 < m {
            s -= up[i] * x[i + 1];
        }
        if i + 2 < m {
            s -= up2[i] * x[i + 2];
        }
        x[i] = s / d[i];
    }
    x
}

fn combine(basis: &[Vec<f64>], coef: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|i| basis.iter().zip(coef).map(|(b, c)| b[i] * c).sum())
        .collect()
}

/// Restarted Lanczos with full reorthogonalization for the smallest
/// eigenpair of `L_s` orthogonal to the first eigenvector, to residual
/// [`DEFAULT_RESIDUAL_TOL`].
pub fn second_eigvec(l: &LaplacianOp, seed: u64) -> Result<EigenPair> {
    second_eigvec_to(l, seed, DEFAULT_RESIDUAL_TOL)
}

/// As [`second_eigvec`] with an explicit residual tolerance.
pub fn second_eigvec_to(l: &LaplacianOp, seed: u64, tol: f64) -> Result<EigenPair> {
    let q = first_eigvec(l)?;
    let n = l.num_nodes();
    let max_basis = MAX_BASIS.min(n - 1);
    let mut start = random_unit_orthogonal(n, &q, seed)?;
    let mut applications = 0;
    let mut best: Option<EigenPair> = None;
    for restart in 0..MAX_RESTARTS {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; n];
        loop {
            let j = basis.len() - 1;
            l.apply_into(&basis[j], &mut w);
            applications += 1;
            alpha.push(dot(&w, &basis[j]));
            reorthogonalize(&mut w, &q, &basis);
            let b = norm2(&w);
            let exhausted = b <= 1e-12 * alpha.iter().fold(1.0f64, |m, a| m.max(a.abs()));
            let full = basis.len() >= max_basis;
            if exhausted || full || basis.len() % CHECK_EVERY == 0 {
                let (theta, s) = smallest_ritz(&alpha, &beta);
                let estimate = (b * s[s.len() - 1]).abs();
                if exhausted || full || estimate < tol {
                    let mut v = combine(&basis, &s, n);
                    deflate(&mut v, &q);
                    let nv = norm2(&v);
                    scale_in_place(&mut v, 1.0 / nv);
                    let residual = residual_of(l, &v, theta);
                    log::debug!(
                        "lanczos restart {restart}: basis {}, theta {theta:e}, residual {residual:e}",
                        basis.len()
                    );
                    let pair = EigenPair {
                        value: theta,
                        vector: v,
                        residual,
                        applications,
                    };
                    let done = residual < 10.0 * tol || exhausted;
                    start = pair.vector.clone();
                    best = Some(pair);
                    if done {
                        return Ok(best.unwrap());
                    }
                    break;
                }
            }
            scale_in_place(&mut w, 1.0 / b);
            beta.push(b);
            basis.push(std::mem::replace(&mut w, vec![0.0; n]));
        }
    }
    let pair = best.expect("at least one Lanczos cycle");
    log::warn!(
        "second eigenvector not fully converged (residual {:e}); using best estimate",
        pair.residual
    );
    Ok(pair)
}

/// Sign normalization (largest-magnitude entry positive, lowest index on
/// ties) and scaling to unit max-norm.
pub fn normalize_sign_and_scale(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    let m = v.get(best).copied().unwrap_or(0.0);
    if m != 0.0 {
        scale_in_place(v, 1.0 / m);
    }
}
