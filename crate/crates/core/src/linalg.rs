//! Vector kernels with deterministic parallel reductions.
//!
//! Reductions split the input into fixed-size chunks, sum each chunk
//! sequentially in parallel, then combine the chunk partials with a
//! sequential pairwise tree. The chunk shape does not depend on the number
//! of worker threads, so results are bitwise reproducible for any pool size.

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 2048;

/// Pairwise (tree) summation of a short slice of partial sums.
fn tree_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => {
            let (a, b) = xs.split_at(n / 2);
            tree_sum(a) + tree_sum(b)
        }
    }
}

/// Deterministic parallel sum of `f(i)` over `0..n`.
pub fn par_sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let nchunks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    tree_sum(&partials)
}

/// Deterministic parallel maximum of `f(i)` over `0..n` (0 for empty input).
pub fn par_max_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(f)
        .reduce(|| 0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    par_sum_by(a.len(), |i| a[i] * b[i])
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    par_max_by(a.len(), |i| a[i].abs())
}

/// `max_i |a_i - b_i|`
pub fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    par_max_by(a.len(), |i| (a[i] - b[i]).abs())
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    par_sum_by(a.len(), |i| (a[i] - b[i]) * (a[i] - b[i])).sqrt()
}

pub fn scale_in_place(a: &mut [f64], s: f64) {
    a.par_iter_mut().with_min_len(CHUNK).for_each(|x| *x *= s);
}

/// `y <- y - <y, q> q` for a unit vector `q`.
pub fn deflate(y: &mut [f64], q: &[f64]) {
    let p = dot(y, q);
    y.par_iter_mut()
        .with_min_len(CHUNK)
        .zip(q.par_iter())
        .for_each(|(yi, qi)| *yi -= p * qi);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reductions_match_sequential_on_small_input() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(dot(&a, &a), 285.0);
        assert_eq!(norm_inf(&[-3.0, 2.0]), 3.0);
        assert_eq!(dist_inf(&[1.0, 2.0], &[1.5, 0.0]), 2.0);
        assert_eq!(par_sum_by(0, |_| 1.0), 0.0);
    }

    #[test]
    fn sum_is_identical_across_pool_sizes() {
        let x: Vec<f64> = (0..50_000).map(|i| ((i as f64) * 0.37).sin() * 1e3).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| dot(&x, &x))
        };
        let one = run(1);
        assert_eq!(one.to_bits(), run(3).to_bits());
        assert_eq!(one.to_bits(), run(8).to_bits());
    }

    #[test]
    fn deflate_removes_component() {
        let q = [0.6, 0.8];
        let mut y = [1.0, 1.0];
        deflate(&mut y, &q);
        assert!(dot(&y, &q).abs() < 1e-15);
    }
}
