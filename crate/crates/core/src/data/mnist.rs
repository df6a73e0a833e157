//! MNIST IDX files (big-endian headers, uncompressed).

use std::fs;
use std::path::Path;

use super::PointCloud;
use crate::error::{Error, Result};

pub const MNIST_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const MNIST_LABELS_MAGIC: u32 = 0x0000_0801;

const FMT: &str = "idx";

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(FMT, "truncated header"))
}

/// Returns `(count, rows * cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != MNIST_IMAGES_MAGIC {
        return Err(Error::format(FMT, format!("image magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let pixels = be_u32(bytes, 8)? as usize * be_u32(bytes, 12)? as usize;
    let payload = &bytes[16..];
    if payload.len() != count * pixels {
        return Err(Error::format(
            FMT,
            format!("header declares {count} images of {pixels} pixels, payload has {} bytes", payload.len()),
        ));
    }
    Ok((count, pixels, payload))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = be_u32(bytes, 0)?;
    if magic != MNIST_LABELS_MAGIC {
        return Err(Error::format(FMT, format!("label magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::format(
            FMT,
            format!("header declares {count} labels, payload has {}", payload.len()),
        ));
    }
    Ok(payload)
}

/// Load and concatenate `(images, labels)` file pairs, keeping only digits
/// in `keep`. The first kept digit maps to `+1`, all others to `-1`.
pub fn load_mnist_idx(files: &[(&Path, &Path)], keep: &[u8]) -> Result<PointCloud> {
    if keep.is_empty() {
        return Err(Error::InvalidParameter("no digits selected".into()));
    }
    let mut dim = None;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (img_path, lbl_path) in files {
        let img_bytes = fs::read(img_path)?;
        let lbl_bytes = fs::read(lbl_path)?;
        let (count, pixels, img) = parse_idx_images(&img_bytes)?;
        let lbl = parse_idx_labels(&lbl_bytes)?;
        if lbl.len() != count {
            return Err(Error::format(FMT, format!("{count} images but {} labels", lbl.len())));
        }
        if *dim.get_or_insert(pixels) != pixels {
            return Err(Error::format(FMT, "image sizes differ between files"));
        }
        for (k, &digit) in lbl.iter().enumerate() {
            if keep.contains(&digit) {
                data.extend(img[k * pixels..(k + 1) * pixels].iter().map(|&p| p as f64 / 255.0));
                labels.push(if digit == keep[0] { 1 } else { -1 });
            }
        }
    }
    let dim = dim.ok_or_else(|| Error::InvalidParameter("no MNIST files given".into()))?;
    if labels.is_empty() {
        return Err(Error::InvalidParameter("no images match the selected digits".into()));
    }
    PointCloud::new(dim, data, Some(labels))
}
