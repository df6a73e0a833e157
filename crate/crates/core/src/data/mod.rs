//! Inputs and outputs: images, priors, point clouds and synthetic data.

mod mnist;
mod pca;
mod pnm;
mod points;
mod synth;

pub use mnist::{load_mnist_idx, parse_idx_images, parse_idx_labels, MNIST_IMAGES_MAGIC, MNIST_LABELS_MAGIC};
pub use pca::{pca_reduce, Pca};
pub use pnm::{decode_pnm, encode_pgm, encode_ppm, load_image, load_prior, prior_from_image, write_image, write_mask};
pub use points::{read_point_cloud, write_point_cloud};
pub use synth::{
    gen_half_circles, gen_two_moons, gen_two_region_image, sample_supervision, TwoRegionImage,
    DEFAULT_HALF_CIRCLE_INNER, DEFAULT_HALF_CIRCLE_OUTER, DEFAULT_MOON_NOISE_DIM, DEFAULT_MOON_NOISE_SIGMA,
};

use crate::error::{Error, Result};
use crate::graph::{FeatureSet, FeatureSource};

/// RGB image with channel values in `[0, 1]`, row-major, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!("empty image {width}x{height}")));
        }
        Error::check_len("ImageBuffer data", 3 * width * height, data.len())?;
        if let Some(k) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(format!(
                "channel value {} at pixel {} outside [0, 1]",
                data[k],
                k / 3
            )));
        }
        Ok(ImageBuffer { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(3 * width * height);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let k = 3 * (y * self.width + x);
        [self.data[k], self.data[k + 1], self.data[k + 2]]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Feature rows with optional `+1/-1` ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub features: FeatureSet,
    pub labels: Option<Vec<i8>>,
}

impl PointCloud {
    pub fn new(dim: usize, data: Vec<f64>, labels: Option<Vec<i8>>) -> Result<Self> {
        let features = FeatureSet::new(dim, data, FeatureSource::PointCloud)?;
        if let Some(l) = &labels {
            Error::check_len("PointCloud labels", features.len(), l.len())?;
        }
        Ok(PointCloud { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }
}
