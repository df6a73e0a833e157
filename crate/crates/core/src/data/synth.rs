//! Seeded synthetic data. Every point draws from its own ChaCha stream, so
//! output does not depend on the number of worker threads.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{ImageBuffer, PointCloud};
use crate::energy::PriorField;
use crate::error::{Error, Result};

pub const DEFAULT_MOON_NOISE_DIM: usize = 98;
pub const DEFAULT_MOON_NOISE_SIGMA: f64 = 0.02;
pub const DEFAULT_HALF_CIRCLE_INNER: (f64, f64) = (0.8, 1.0);
pub const DEFAULT_HALF_CIRCLE_OUTER: (f64, f64) = (1.8, 2.0);

fn point_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

fn check_even(n: usize) -> Result<()> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::InvalidParameter(format!("point count must be even and positive, got {n}")));
    }
    Ok(())
}

/// Two interleaved unit half circles: the upper one centered at the origin
/// (label `+1`) and the lower one centered at `(1, 0.5)` (label `-1`),
/// embedded in `2 + noise_dim` dimensions with Gaussian noise of standard
/// deviation `noise_sigma` added to every coordinate.
pub fn gen_two_moons(n: usize, noise_dim: usize, noise_sigma: f64, seed: u64) -> Result<PointCloud> {
    check_even(n)?;
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sigma must be >= 0, got {noise_sigma}")));
    }
    let dim = 2 + noise_dim;
    let noise = Normal::new(0.0, noise_sigma).unwrap();
    let half = n / 2;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = point_rng(seed, i);
            let t = rng.random_range(0.0..=PI);
            let mut p = vec![0.0; dim];
            if i < half {
                p[0] = t.cos();
                p[1] = t.sin();
            } else {
                p[0] = 1.0 - t.cos();
                p[1] = 0.5 - t.sin();
            }
            if noise_sigma > 0.0 {
                for v in &mut p {
                    *v += noise.sample(&mut rng);
                }
            }
            p
        })
        .collect();
    let labels = (0..n).map(|i| if i < half { 1 } else { -1 }).collect();
    PointCloud::new(dim, rows.concat(), Some(labels))
}

/// Two concentric upper half-annuli: radii uniform in `inner` (label `+1`)
/// and in `outer` (label `-1`), angles uniform in `[0, pi]`.
pub fn gen_half_circles(n: usize, inner: (f64, f64), outer: (f64, f64), seed: u64) -> Result<PointCloud> {
    check_even(n)?;
    for (lo, hi) in [inner, outer] {
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad radius range [{lo}, {hi}]")));
        }
    }
    if !(inner.1 < outer.0 || outer.1 < inner.0) {
        return Err(Error::InvalidParameter(format!(
            "radius ranges [{}, {}] and [{}, {}] overlap",
            inner.0, inner.1, outer.0, outer.1
        )));
    }
    let half = n / 2;
    let rows: Vec<[f64; 2]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = point_rng(seed, i);
            let (lo, hi) = if i < half { inner } else { outer };
            let t = rng.random_range(0.0..=PI);
            let r = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    let labels = (0..n).map(|i| if i < half { 1 } else { -1 }).collect();
    PointCloud::new(2, rows.concat(), Some(labels))
}

/// Reveal `round(fraction * n_c)` (at least one) seeded random points of
/// each class `c` as prior labels.
pub fn sample_supervision(labels: &[i8], fraction: f64, seed: u64) -> Result<PriorField> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!("supervision fraction must be in (0, 1], got {fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut revealed = Vec::new();
    for class in [1i8, -1] {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        let m = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len());
        for k in sample(&mut rng, members.len(), m) {
            revealed.push((members[k], class));
        }
    }
    revealed.sort_unstable();
    PriorField::from_labels(labels.len(), &revealed)
}

/// Synthetic segmentation instance with known ground truth.
#[derive(Debug, Clone)]
pub struct TwoRegionImage {
    pub image: ImageBuffer,
    pub truth: Vec<i8>,
    pub prior: PriorField,
}

/// `width x height` image with an elliptical foreground (label `+1`) on a
/// background of a different color, both perturbed by clamped Gaussian
/// noise of standard deviation `noise`. A `prior_fraction` of each class is
/// revealed as prior.
pub fn gen_two_region_image(
    width: usize,
    height: usize,
    noise: f64,
    prior_fraction: f64,
    seed: u64,
) -> Result<TwoRegionImage> {
    if width < 4 || height < 4 {
        return Err(Error::InvalidParameter("synthetic image must be at least 4x4".into()));
    }
    const FOREGROUND: [f64; 3] = [0.75, 0.35, 0.3];
    const BACKGROUND: [f64; 3] = [0.3, 0.45, 0.7];
    let (cx, cy) = (width as f64 * 0.45, height as f64 * 0.55);
    let (rx, ry) = (width as f64 * 0.28, height as f64 * 0.22);
    let inside = |x: usize, y: usize| {
        let dx = (x as f64 + 0.5 - cx) / rx;
        let dy = (y as f64 + 0.5 - cy) / ry;
        dx * dx + dy * dy <= 1.0
    };
    let gauss = Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let n = width * height;
    let data: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = point_rng(seed, i);
            let base = if inside(i % width, i / width) { FOREGROUND } else { BACKGROUND };
            let mut px = base;
            if noise > 0.0 {
                for v in &mut px {
                    *v = (*v + gauss.sample(&mut rng)).clamp(0.0, 1.0);
                }
            }
            px
        })
        .collect();
    let truth: Vec<i8> = (0..n).map(|i| if inside(i % width, i / width) { 1 } else { -1 }).collect();
    let prior = sample_supervision(&truth, prior_fraction, seed ^ 0x5eed)?;
    Ok(TwoRegionImage {
        image: ImageBuffer::new(width, height, data)?,
        truth,
        prior,
    })
}
