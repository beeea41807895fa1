//! RGB image buffer shared by every backend and metric.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions {0}x{1} below the 8x8 minimum")]
    TooSmall(usize, usize),
    #[error("pixel buffer length {found} does not match {expected} (h*w*3)")]
    LengthMismatch { expected: usize, found: usize },
    #[error("pixel value {0} outside [0,1] or non-finite")]
    BadValue(f64),
}

/// An RGB image with values in `[0, 1]`, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, ImageError> {
        if height < 8 || width < 8 {
            return Err(ImageError::TooSmall(height, width));
        }
        let expected = height * width * 3;
        if values.len() != expected {
            return Err(ImageError::LengthMismatch {
                expected,
                found: values.len(),
            });
        }
        for &v in &values {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(ImageError::BadValue(v));
            }
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// Uniform fill, handy for tests and degenerate cases.
    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(height, width, vec![value; height * width * 3])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let base = (y * self.width + x) * 3;
        [self.values[base], self.values[base + 1], self.values[base + 2]]
    }

    fn gray(&self, y: usize, x: usize) -> f64 {
        let [r, g, b] = self.pixel(y, x);
        (r + g + b) / 3.0
    }

    /// Bilinear grayscale sample at fractional coordinates, clamped to bounds.
    pub fn sample_pixel(&self, y: f64, x: f64) -> [f64; 3] {
        let yc = y.clamp(0.0, (self.height - 1) as f64);
        let xc = x.clamp(0.0, (self.width - 1) as f64);
        let y0 = yc.floor() as usize;
        let x0 = xc.floor() as usize;
        let y1 = (y0 + 1).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let fy = yc - y0 as f64;
        let fx = xc - x0 as f64;
        let mut out = [0.0; 3];
        for c in 0..3 {
            let p00 = self.pixel(y0, x0)[c];
            let p01 = self.pixel(y0, x1)[c];
            let p10 = self.pixel(y1, x0)[c];
            let p11 = self.pixel(y1, x1)[c];
            out[c] = p00 * (1.0 - fy) * (1.0 - fx)
                + p01 * (1.0 - fy) * fx
                + p10 * fy * (1.0 - fx)
                + p11 * fy * fx;
        }
        out
    }

    /// Mean-pooled 8x8 grayscale downsample, the canonical toy-encoder input.
    pub fn gray_downsample_8x8(&self) -> [f64; 64] {
        let mut out = [0.0; 64];
        for cy in 0..8 {
            let y0 = cy * self.height / 8;
            let y1 = ((cy + 1) * self.height / 8).max(y0 + 1);
            for cx in 0..8 {
                let x0 = cx * self.width / 8;
                let x1 = ((cx + 1) * self.width / 8).max(x0 + 1);
                let mut sum = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sum += self.gray(y, x);
                    }
                }
                out[cy * 8 + cx] = sum / ((y1 - y0) * (x1 - x0)) as f64;
            }
        }
        out
    }

    /// Crop a rectangle; coordinates are clamped to bounds.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self, ImageError> {
        let top = top.min(self.height.saturating_sub(1));
        let left = left.min(self.width.saturating_sub(1));
        let height = height.min(self.height - top);
        let width = width.min(self.width - left);
        let mut values = Vec::with_capacity(height * width * 3);
        for y in top..top + height {
            for x in left..left + width {
                values.extend_from_slice(&self.pixel(y, x));
            }
        }
        Self::new(height, width, values)
    }
}

/// Procedurally drawn portrait fixture: gradient background, skin-tone
/// ellipse, darker eye and mouth blobs. Seeded so fixture sets are diverse
/// but reproducible.
pub fn synthetic_portrait(seed: u64, height: usize, width: usize) -> ImageBuffer {
    let params = rng::uniform_vector(rng::mix(seed, "portrait"), 8);
    let skin = [
        0.55 + 0.3 * params[0],
        0.40 + 0.25 * params[1],
        0.30 + 0.2 * params[2],
    ];
    let bg = [0.1 + 0.4 * params[3], 0.2 + 0.4 * params[4], 0.3 + 0.4 * params[5]];
    let cy = height as f64 / 2.0;
    let cx = width as f64 / 2.0;
    let ry = height as f64 * (0.28 + 0.08 * params[6]);
    let rx = width as f64 * (0.20 + 0.08 * params[7]);
    let mut values = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        for x in 0..width {
            let fy = y as f64 / height as f64;
            let fx = x as f64 / width as f64;
            let dy = (y as f64 - cy) / ry;
            let dx = (x as f64 - cx) / rx;
            let inside = dy * dy + dx * dx <= 1.0;
            let mut px = if inside {
                skin
            } else {
                [bg[0] * (1.0 - 0.3 * fy), bg[1] * (1.0 - 0.3 * fx), bg[2]]
            };
            // eyes and mouth as dark blobs at fixed face fractions
            for &(ey, ex) in &[(0.40, 0.38), (0.40, 0.62), (0.68, 0.5)] {
                let by = cy + (ey - 0.5) * 2.0 * ry;
                let bx = cx + (ex - 0.5) * 2.0 * rx;
                let d = ((y as f64 - by).powi(2) + (x as f64 - bx).powi(2)).sqrt();
                if inside && d < (width.min(height) as f64) * 0.04 {
                    px = [0.12, 0.08, 0.08];
                }
            }
            values.extend_from_slice(&[
                px[0].clamp(0.0, 1.0),
                px[1].clamp(0.0, 1.0),
                px[2].clamp(0.0, 1.0),
            ]);
        }
    }
    ImageBuffer::new(height, width, values).expect("synthetic portrait is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_images() {
        assert_eq!(
            ImageBuffer::filled(4, 64, 0.5).unwrap_err(),
            ImageError::TooSmall(4, 64)
        );
    }

    #[test]
    fn rejects_out_of_range_values() {
        let mut v = vec![0.5; 8 * 8 * 3];
        v[10] = 1.5;
        assert!(matches!(
            ImageBuffer::new(8, 8, v),
            Err(ImageError::BadValue(_))
        ));
    }

    #[test]
    fn downsample_of_uniform_is_uniform() {
        let img = ImageBuffer::filled(32, 48, 0.25).unwrap();
        let ds = img.gray_downsample_8x8();
        for v in ds {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_portrait_is_deterministic_and_varied() {
        let a = synthetic_portrait(1, 64, 64);
        let b = synthetic_portrait(1, 64, 64);
        let c = synthetic_portrait(2, 64, 64);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
