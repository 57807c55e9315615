use std::path::Path;

use image::DynamicImage;

use super::{GeometryError, PixelMask, Result};

/// Per-pixel building probability in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width as usize * height as usize {
            return Err(GeometryError::InvalidDimensions { width, height });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(GeometryError::InvalidProbability { index, value });
        }
        Ok(Self { width, height, values })
    }

    pub fn constant(width: u32, height: u32, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    /// Loads an 8- or 16-bit single-channel image, scaling by the largest
    /// representable value.
    pub fn from_image(img: &DynamicImage) -> Result<Self> {
        let (width, height, values) = match img {
            DynamicImage::ImageLuma8(buf) => (
                buf.width(),
                buf.height(),
                buf.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
            ),
            DynamicImage::ImageLuma16(buf) => (
                buf.width(),
                buf.height(),
                buf.as_raw().iter().map(|&v| v as f64 / 65535.0).collect(),
            ),
            other => {
                return Err(GeometryError::UnsupportedImage(format!(
                    "expected single-channel 8/16-bit image, got {:?}",
                    other.color()
                )))
            }
        };
        Self::new(width, height, values)
    }

    pub fn open(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| GeometryError::UnsupportedImage(format!("{}: {e}", path.display())))?;
        Self::from_image(&img)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Foreground where the value is 1, for maps that are already binary.
    pub fn to_mask(&self) -> Result<PixelMask> {
        let px: Vec<bool> = self.values.iter().map(|&v| v >= 1.0).collect();
        PixelMask::from_row_major(self.width, self.height, &px)
    }
}

// Box sums are computed on a 2^-32 fixed-point grid so that equal values
// compare equal to their local mean regardless of summation order.
const FIXED_ONE: f64 = (1u64 << 32) as f64;

fn to_fixed(v: f64) -> i128 {
    (v * FIXED_ONE).round() as i128
}

/// Local-mean adaptive threshold.
///
/// A pixel is foreground iff its value is strictly greater than the mean of
/// the `window` x `window` neighbourhood centered on it (clipped at the image
/// border) minus `offset`.
pub fn adaptive_threshold(map: &ProbabilityMap, window: u32, offset: f64) -> Result<PixelMask> {
    let max = map.width.min(map.height);
    if window < 3 || window.is_multiple_of(2) || window > max {
        return Err(GeometryError::InvalidWindow { window, max });
    }
    let (w, h) = (map.width as usize, map.height as usize);
    let fixed: Vec<i128> = map.values.iter().map(|&v| to_fixed(v)).collect();

    // integral[(y) * (w + 1) + x] = sum of fixed[..y, ..x]
    let stride = w + 1;
    let mut integral = vec![0i128; stride * (h + 1)];
    for y in 0..h {
        let mut row_sum = 0i128;
        for x in 0..w {
            row_sum += fixed[y * w + x];
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row_sum;
        }
    }

    let half = (window / 2) as usize;
    let offset_fixed = to_fixed(offset);
    let mut out = vec![false; w * h];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(half), (y + half + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(half), (x + half + 1).min(w));
            let sum = integral[y1 * stride + x1] - integral[y0 * stride + x1] - integral[y1 * stride + x0]
                + integral[y0 * stride + x0];
            let count = ((y1 - y0) * (x1 - x0)) as i128;
            // value > sum / count - offset, scaled by count
            out[y * w + x] = fixed[y * w + x] * count > sum - offset_fixed * count;
        }
    }
    PixelMask::from_row_major(map.width, map.height, &out)
}
