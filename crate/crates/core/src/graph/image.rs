use rayon::prelude::*;

use super::kernel::weighted_sq_dist;
use super::sparse::SparseSym;
use super::window::WindowSpec;
use crate::data::ImageBuffer;
use crate::error::{Error, Result};

/// 5x5 patches.
pub const DEFAULT_PATCH_HALFWIDTH: usize = 2;

/// Per-position patch weights `exp(-r^2 / 2)`, `r` the Chebyshev ring of the
/// position, normalized to sum to one. Row-major over the patch.
pub fn patch_alpha(halfwidth: usize) -> Vec<f64> {
    let h = halfwidth as isize;
    let mut alpha: Vec<f64> = (-h..=h)
        .flat_map(|dy| (-h..=h).map(move |dx| dx.abs().max(dy.abs()) as f64))
        .map(|r| (-r * r / 2.0).exp())
        .collect();
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);
    alpha
}

/// Vectorized RGB patches, clamp-to-edge at the border. Pixel `i` owns
/// `features[i * len .. (i + 1) * len]` with `len = 3 (2h + 1)^2`; positions
/// are in the same row-major order for every pixel.
pub fn patch_features(image: &ImageBuffer, halfwidth: usize) -> Vec<f64> {
    let (w, h) = (image.width(), image.height());
    let hw = halfwidth as isize;
    let side = 2 * halfwidth + 1;
    let len = 3 * side * side;
    let mut out = vec![0.0; w * h * len];
    out.par_chunks_mut(len).enumerate().for_each(|(i, feat)| {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        let mut k = 0;
        for dy in -hw..=hw {
            let yy = (y + dy).clamp(0, h as isize - 1) as usize;
            for dx in -hw..=hw {
                let xx = (x + dx).clamp(0, w as isize - 1) as usize;
                feat[k..k + 3].copy_from_slice(&image.pixel(xx, yy));
                k += 3;
            }
        }
    });
    out
}

/// Nonlocal patch-similarity graph of an image.
///
/// `w_ij = exp(-sum_n alpha_n |P_in - P_jn|^2 / sigma^2)` for `j` inside the
/// search window of `i`, zero elsewhere. Node index is `y * width + x`.
pub fn build_image_graph(
    image: &ImageBuffer,
    window: &WindowSpec,
    patch_halfwidth: usize,
    sigma: f64,
) -> Result<SparseSym> {
    window.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    let (w, h) = (image.width(), image.height());
    let n = w * h;
    let alpha: Vec<f64> = patch_alpha(patch_halfwidth)
        .into_iter()
        .flat_map(|a| [a; 3])
        .collect();
    let len = alpha.len();
    let features = patch_features(image, patch_halfwidth);
    let offsets = window.offsets();
    let inv_s2 = 1.0 / (sigma * sigma);

    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let fi = &features[i * len..(i + 1) * len];
            offsets
                .iter()
                .filter_map(|&(dx, dy)| {
                    let (xx, yy) = (x + dx, y + dy);
                    if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                        return None;
                    }
                    let j = yy as usize * w + xx as usize;
                    let fj = &features[j * len..(j + 1) * len];
                    Some((j as u32, (-weighted_sq_dist(fi, fj, &alpha) * inv_s2).exp()))
                })
                .collect()
        })
        .collect();

    if let Some(i) = rows.iter().position(Vec::is_empty) {
        return Err(Error::Graph(format!(
            "pixel ({}, {}) has no neighbors inside the search window",
            i % w,
            i / w
        )));
    }
    SparseSym::from_rows(n, rows)
}
