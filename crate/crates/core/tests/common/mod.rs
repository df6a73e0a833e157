#![allow(dead_code)]

use pdca::graph::{LaplacianOp, Normalization, SparseSym};
use pdca::PriorField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random connected graph: a ring plus random chords with weights in (0, 1].
pub fn random_graph(n: usize, density: f64, seed: u64) -> SparseSym {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n, rng.random_range(0.05..=1.0)));
    }
    for i in 0..n {
        for j in i + 2..n {
            if (i, j) != (0, n - 1) && rng.random::<f64>() < density {
                edges.push((i, j, rng.random_range(0.05..=1.0)));
            }
        }
    }
    SparseSym::from_edges(n, &edges).unwrap()
}

pub fn random_prior(n: usize, frac: f64, seed: u64) -> PriorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let mut labels = Vec::new();
    for i in 0..n {
        if rng.random::<f64>() < frac {
            labels.push((i, if rng.random::<bool>() { 1i8 } else { -1 }));
        }
    }
    PriorField::from_labels(n, &labels).unwrap()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234_5678);
    (0..n).map(|_| rng.random_range(-1.5..=1.5)).collect()
}

pub fn op(w: &SparseSym, mode: Normalization) -> LaplacianOp {
    LaplacianOp::new(w.clone(), mode)
}

pub const MODES: [Normalization; 2] = [Normalization::Normalized, Normalization::Unnormalized];

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
