//! Binary PGM (P5) and PPM (P6) codecs.

use std::fs;
use std::path::Path;

use super::ImageBuffer;
use crate::energy::PriorField;
use crate::error::{Error, Result};

const FMT: &str = "pnm";

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(FMT, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::format(FMT, format!("{what} out of range")))
    }
}

/// Decode a P5 or P6 file. Gray images are replicated to three channels;
/// samples are divided by maxval (16-bit samples are big-endian).
pub fn decode_pnm(bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format(FMT, "missing magic"));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        m => return Err(Error::format(FMT, format!("unsupported magic P{}", m as char))),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format(FMT, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::format(FMT, format!("maxval {maxval} outside 1..=65535")));
    }
    match bytes.get(h.pos) {
        Some(c) if c.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(Error::format(FMT, "missing whitespace after maxval")),
    }
    let bps = if maxval < 256 { 1 } else { 2 };
    let samples = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| Error::format(FMT, "image too large"))?;
    let payload = &bytes[h.pos..];
    if payload.len() < samples * bps {
        return Err(Error::format(
            FMT,
            format!("truncated payload: need {} bytes, have {}", samples * bps, payload.len()),
        ));
    }
    let scale = maxval as f64;
    let mut values = Vec::with_capacity(samples);
    for k in 0..samples {
        let raw = if bps == 1 {
            payload[k] as usize
        } else {
            ((payload[2 * k] as usize) << 8) | payload[2 * k + 1] as usize
        };
        if raw > maxval {
            return Err(Error::format(FMT, format!("sample {raw} exceeds maxval {maxval}")));
        }
        values.push(raw as f64 / scale);
    }
    let data = if channels == 3 {
        values
    } else {
        values.iter().flat_map(|&v| [v, v, v]).collect()
    };
    ImageBuffer::new(width, height, data)
}

pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = fs::read(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    decode_pnm(&bytes)
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ppm(image: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.data().iter().map(|&v| to_byte(v)));
    out
}

pub fn encode_pgm(width: usize, height: usize, gray: &[u8]) -> Result<Vec<u8>> {
    Error::check_len("encode_pgm", width * height, gray.len())?;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    Ok(out)
}

pub fn write_image(path: &Path, image: &ImageBuffer) -> Result<()> {
    fs::write(path, encode_ppm(image))?;
    Ok(())
}

/// Foreground (`+1`) as 255, everything else as 0.
pub fn write_mask(path: &Path, labels: &[i8], width: usize, height: usize) -> Result<()> {
    let gray: Vec<u8> = labels.iter().map(|&l| if l == 1 { 255 } else { 0 }).collect();
    fs::write(path, encode_pgm(width, height, &gray)?)?;
    Ok(())
}

/// Pure red pixels mark foreground (`y = +1`), pure blue background
/// (`y = -1`); anything else is unlabeled.
pub fn prior_from_image(mask: &ImageBuffer) -> PriorField {
    let n = mask.len();
    let mut y = vec![0.0; n];
    let mut lambda = vec![0.0; n];
    for yy in 0..mask.height() {
        for x in 0..mask.width() {
            let i = yy * mask.width() + x;
            match mask.pixel(x, yy) {
                [r, g, b] if r == 1.0 && g == 0.0 && b == 0.0 => {
                    y[i] = 1.0;
                    lambda[i] = 1.0;
                }
                [r, g, b] if r == 0.0 && g == 0.0 && b == 1.0 => {
                    y[i] = -1.0;
                    lambda[i] = 1.0;
                }
                _ => {}
            }
        }
    }
    PriorField::new(y, lambda).expect("prior built from valid labels")
}

pub fn load_prior(path: &Path, width: usize, height: usize) -> Result<PriorField> {
    let mask = load_image(path)?;
    if mask.width() != width || mask.height() != height {
        return Err(Error::InvalidParameter(format!(
            "prior is {}x{}, image is {width}x{height}",
            mask.width(),
            mask.height()
        )));
    }
    Ok(prior_from_image(&mask))
}
