//! Dense reference implementations for checking the matrix-free code on
//! small problems: explicit assembly of the system matrix, Cholesky
//! solves, symmetric eigendecomposition and brute-force energies.
//!
//! Nothing here calls into the solver's operators except
//! [`columns_of`], which exists precisely to expose an operator as a matrix.

use pdca::energy::{EnergyParams, PriorField};
use pdca::graph::{Normalization, SparseSym};
use pdca::precond::StepSize;

pub const MAX_DENSE: usize = 2000;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("dense oracle limited to n <= {MAX_DENSE}, got {0}")]
    TooLarge(usize),
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Row-major symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSym {
    n: usize,
    a: Vec<f64>,
}

impl DenseSym {
    pub fn zeros(n: usize) -> Result<Self> {
        if n > MAX_DENSE {
            return Err(OracleError::TooLarge(n));
        }
        Ok(DenseSym { n, a: vec![0.0; n * n] })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        Ok(m)
    }

    /// Symmetrizes by averaging, so the result is exactly symmetric.
    pub fn from_rows(n: usize, a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Sets `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        self.a[i * self.n + i] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.a
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.a[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `self - diag(g)`, negated: `diag(g) - self`.
    pub fn diag_minus(&self, g: &[f64]) -> DenseSym {
        assert_eq!(g.len(), self.n);
        let mut m = self.clone();
        for v in &mut m.a {
            *v = -*v;
        }
        for (i, &gi) in g.iter().enumerate() {
            m.add_diag(i, gi);
        }
        m
    }
}

/// Matrix of a linear operator, built by applying it to unit vectors.
pub fn columns_of(n: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> Result<DenseSym> {
    let mut raw = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = apply(&e);
        for i in 0..n {
            raw[i * n + j] = col[i];
        }
        e[j] = 0.0;
    }
    let mut m = DenseSym::zeros(n)?;
    m.a = raw;
    Ok(m)
}

pub fn dense_weights(w: &SparseSym) -> Result<DenseSym> {
    let n = w.num_nodes();
    let mut m = DenseSym::zeros(n)?;
    for (i, j, v) in w.triplets() {
        m.a[i * n + j] = v;
    }
    Ok(m)
}

fn row_sums(w: &DenseSym) -> Vec<f64> {
    (0..w.n).map(|i| (0..w.n).map(|j| w.get(i, j)).sum()).collect()
}

/// `D - W` or `I - D^{-1/2} W D^{-1/2}` from the explicit weight matrix.
pub fn dense_laplacian(w: &SparseSym, mode: Normalization) -> Result<DenseSym> {
    let wd = dense_weights(w)?;
    let n = wd.n;
    let d = row_sums(&wd);
    let mut l = DenseSym::zeros(n)?;
    for i in 0..n {
        for j in 0..n {
            let v = match mode {
                Normalization::Unnormalized => {
                    if i == j {
                        d[i] - wd.get(i, j)
                    } else {
                        -wd.get(i, j)
                    }
                }
                Normalization::Normalized => {
                    let off = wd.get(i, j) / (d[i].sqrt() * d[j].sqrt());
                    if i == j {
                        1.0 - off
                    } else {
                        -off
                    }
                }
            };
            l.a[i * n + j] = v;
        }
    }
    Ok(l)
}

/// `D + W` (signless Laplacian).
pub fn dense_signless(w: &SparseSym) -> Result<DenseSym> {
    let mut m = dense_weights(w)?;
    let d = row_sums(&m);
    for (i, di) in d.into_iter().enumerate() {
        m.add_diag(i, di);
    }
    Ok(m)
}

/// `T = eps L + eta Lambda + c I`, or `I + k T`.
pub fn assemble_dense(
    w: &SparseSym,
    mode: Normalization,
    prior: &PriorField,
    p: &EnergyParams,
    step: StepSize,
) -> Result<DenseSym> {
    let mut t = dense_laplacian(w, mode)?;
    let n = t.n;
    for v in &mut t.a {
        *v *= p.epsilon;
    }
    for i in 0..n {
        t.add_diag(i, p.eta * prior.lambda()[i] + p.convex_shift);
    }
    if let StepSize::Finite(k) = step {
        for v in &mut t.a {
            *v *= k;
        }
        for i in 0..n {
            t.add_diag(i, 1.0);
        }
    }
    Ok(t)
}

/// Cholesky factorization and two triangular solves.
pub fn dense_solve(a: &DenseSym, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    assert_eq!(b.len(), n);
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut s = a.get(j, j);
        for k in 0..j {
            s -= l[j * n + k] * l[j * n + k];
        }
        if !(s > 0.0) {
            return Err(OracleError::NotPositiveDefinite { pivot: j, value: s });
        }
        let ljj = s.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    Ok(x)
}

/// Householder reduction to tridiagonal form. On return `d` holds the
/// diagonal, `e[1..]` the subdiagonal and `v` the accumulated transform.
fn tridiagonalize(a: &DenseSym, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let n = a.n;
    v.copy_from_slice(&a.a);
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    if n > 0 {
        v[at(n - 1, n - 1)] = 1.0;
    }
    e[0] = 0.0;
}

/// Implicit QL iteration on the tridiagonal form, accumulating rotations
/// into `v`. Eigenvalues end up ascending in `d`, eigenvectors in the
/// columns of `v`.
fn tridiagonal_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    if n > 0 {
        e[n - 1] = 0.0;
    }
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 200 {
                    return Err(OracleError::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    // selection sort keeps eigenpairs together
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().take(n).skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                v.swap(at(j, i), at(j, k));
            }
        }
    }
    Ok(())
}

/// Eigenvalues (ascending) and eigenvectors (`vectors[k]` pairs with
/// `values[k]`).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn dense_eigen(a: &DenseSym) -> Result<Eigen> {
    let n = a.n;
    let mut v = vec![0.0; n * n];
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(a, &mut v, &mut d, &mut e);
    tridiagonal_ql(n, &mut v, &mut d, &mut e)?;
    let vectors = (0..n).map(|k| (0..n).map(|i| v[i * n + k]).collect()).collect();
    Ok(Eigen { values: d, vectors })
}

pub fn dense_eigs(a: &DenseSym) -> Result<Vec<f64>> {
    Ok(dense_eigen(a)?.values)
}

/// Smallest eigenvalue of `diag(g) - A`.
pub fn feasibility_margin(g: &[f64], a: &DenseSym) -> Result<f64> {
    let m = a.diag_minus(g);
    Ok(dense_eigs(&m)?[0])
}

/// Eigenvector of the second-smallest eigenvalue of `L_s`.
pub fn dense_second_eigvec(w: &SparseSym) -> Result<(f64, Vec<f64>)> {
    let l = dense_laplacian(w, Normalization::Normalized)?;
    let mut eig = dense_eigen(&l)?;
    Ok((eig.values[1], eig.vectors.swap_remove(1)))
}

/// `F(u)` evaluated term by term from the explicit Laplacian.
pub fn brute_energy(w: &SparseSym, mode: Normalization, u: &[f64], prior: &PriorField, p: &EnergyParams) -> Result<f64> {
    let l = dense_laplacian(w, mode)?;
    let lu = l.mul_vec(u);
    let quad: f64 = u.iter().zip(&lu).map(|(a, b)| a * b).sum();
    let well: f64 = u.iter().map(|x| (x * x - 1.0).powi(2) / 4.0).sum();
    let fid: f64 = (0..u.len())
        .map(|i| prior.lambda()[i] * (u[i] - prior.targets()[i]).powi(2))
        .sum();
    Ok(0.5 * p.epsilon * quad + well / p.epsilon + 0.5 * p.eta * fid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> DenseSym {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>();
            }
            a[i * n + i] += n as f64 * 0.1;
        }
        DenseSym::from_rows(n, a).unwrap()
    }

    fn pair() -> SparseSym {
        SparseSym::from_edges(2, &[(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn assemble_pair() {
        let p = EnergyParams { epsilon: 1.0, eta: 0.0, convex_shift: 1.0 };
        let prior = PriorField::empty(2);
        let t = assemble_dense(&pair(), Normalization::Unnormalized, &prior, &p, StepSize::Infinite).unwrap();
        assert_eq!(t.data(), &[2.0, -1.0, -1.0, 2.0]);
        let t = assemble_dense(&pair(), Normalization::Unnormalized, &prior, &p, StepSize::Finite(1.0)).unwrap();
        assert_eq!(t.data(), &[3.0, -1.0, -1.0, 3.0]);
    }

    #[test]
    fn solve_examples() {
        let a = DenseSym::from_rows(2, vec![2.0, -1.0, -1.0, 2.0]).unwrap();
        let x = dense_solve(&a, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let id = DenseSym::identity(3).unwrap();
        assert_eq!(dense_solve(&id, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let bad = DenseSym::from_rows(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(dense_solve(&bad, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn solve_random_residual() {
        let a = random_spd(100, 5);
        let b: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let x = dense_solve(&a, &b).unwrap();
        let r = a.mul_vec(&x);
        let bmax = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let res = r.iter().zip(&b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(res < 1e-10 * bmax, "{res}");
    }

    #[test]
    fn eigs_examples() {
        let l = dense_laplacian(&pair(), Normalization::Unnormalized).unwrap();
        let ev = dense_eigs(&l).unwrap();
        assert!(ev[0].abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
        let mut diag = DenseSym::zeros(3).unwrap();
        for (i, v) in [3.0, -1.0, 2.0].into_iter().enumerate() {
            diag.set(i, i, v);
        }
        assert_eq!(dense_eigs(&diag).unwrap(), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigs_trace_and_determinant() {
        for seed in 0..5 {
            let n = 12;
            let a = random_spd(n, seed);
            let eig = dense_eigen(&a).unwrap();
            let tr: f64 = eig.values.iter().sum();
            assert!((tr - a.trace()).abs() < 1e-8 * a.trace().abs());
            // determinant through the Cholesky diagonal
            let logdet_eig: f64 = eig.values.iter().map(|v| v.ln()).sum();
            let mut logdet_chol = 0.0;
            let mut m = a.clone();
            for j in 0..n {
                let pivot = m.get(j, j);
                logdet_chol += pivot.ln();
                for i in j + 1..n {
                    let f = m.get(i, j) / pivot;
                    for k in j..n {
                        let v = m.a[i * n + k] - f * m.a[j * n + k];
                        m.a[i * n + k] = v;
                    }
                }
            }
            assert!((logdet_eig - logdet_chol).abs() < 1e-8 * logdet_chol.abs().max(1.0));
            for (k, vec) in eig.vectors.iter().enumerate() {
                let av = a.mul_vec(vec);
                for i in 0..n {
                    assert!((av[i] - eig.values[k] * vec[i]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn second_eigvec_of_pair() {
        let (val, v) = dense_second_eigvec(&pair()).unwrap();
        assert!((val - 2.0).abs() < 1e-14);
        assert!((v[0] + v[1]).abs() < 1e-14);
    }

    #[test]
    fn size_cap() {
        assert!(matches!(DenseSym::zeros(MAX_DENSE + 1), Err(OracleError::TooLarge(_))));
    }
}
