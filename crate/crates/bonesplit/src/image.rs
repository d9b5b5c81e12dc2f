//! Grayscale image and mask grids plus the elementary operations on them.
//!
//! Every grid in this crate is row-major: `index = y * width + x`, where `x`
//! is the column and `y` is the row. Intensities are `f64` in the nominal
//! range `[0, 1]`; integer samples exist only at the I/O boundary and are
//! mapped through [`normalize_samples`] / [`denormalize_samples`].

use crate::error::{Error, Result};

/// Sample depth of the integer representation used when reading and writing
/// image files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    /// Largest representable sample: 255 or 65535.
    pub fn max_value(self) -> u16 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }

    /// Parse a bit count; anything other than 8 or 16 is rejected.
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::UnsupportedBitDepth(other)),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            BitDepth::Eight => 8,
            BitDepth::Sixteen => 16,
        }
    }
}

/// Map raw unsigned samples to intensities: `value / (2^depth - 1)`.
///
/// 0 maps to 0.0 and the maximum sample maps to exactly 1.0. Samples above
/// the representable maximum (possible only for 8-bit data carried in `u16`)
/// are an error.
pub fn normalize_samples(raw: &[u16], depth: BitDepth) -> Result<Vec<f64>> {
    let max = depth.max_value();
    let scale = 1.0 / f64::from(max);
    raw.iter()
        .map(|&v| {
            if v > max {
                Err(Error::SampleOutOfRange { value: v, max })
            } else {
                Ok(f64::from(v) * scale)
            }
        })
        .collect()
}

/// Map intensities back to raw samples by rounding `value * (2^depth - 1)`
/// to the nearest integer. Values outside `[0, 1]` are clamped first; the
/// second return value counts how many pixels required clamping.
pub fn denormalize_samples(values: &[f64], depth: BitDepth) -> (Vec<u16>, usize) {
    let max = f64::from(depth.max_value());
    let mut clamped = 0usize;
    let samples = values
        .iter()
        .map(|&v| {
            let c = if v < 0.0 {
                clamped += 1;
                0.0
            } else if v > 1.0 {
                clamped += 1;
                1.0
            } else {
                v
            };
            (c * max).round() as u16
        })
        .collect();
    (samples, clamped)
}

/// A grayscale image: `width * height` intensities stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    /// Create an image filled with a constant value.
    ///
    /// Dimensions must be nonzero and `width * height` must not overflow.
    pub fn new(width: usize, height: usize, fill: f64) -> Result<Self> {
        let len = checked_len(width, height)?;
        Ok(Image { width, height, data: vec![fill; len] })
    }

    /// Wrap an existing row-major buffer.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        let len = checked_len(width, height)?;
        if data.len() != len {
            return Err(Error::BufferLength { len: data.len(), width, height });
        }
        Ok(Image { width, height, data })
    }

    /// Build an image from raw integer samples at the given bit depth.
    pub fn from_samples(width: usize, height: usize, raw: &[u16], depth: BitDepth) -> Result<Self> {
        let data = normalize_samples(raw, depth)?;
        Image::from_vec(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major index of `(x, y)`.
    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        let i = self.idx(x, y);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// True if both images have the same dimensions.
    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Minimum and maximum intensity, optionally restricted to mask pixels.
    ///
    /// With a mask, the mask must match the image shape and select at least
    /// one pixel.
    pub fn min_max(&self, mask: Option<&Mask>) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        match mask {
            None => {
                for &v in &self.data {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            Some(m) => {
                check_mask_shape(self.width, self.height, m)?;
                let mut any = false;
                for (i, &v) in self.data.iter().enumerate() {
                    if m.data[i] {
                        lo = lo.min(v);
                        hi = hi.max(v);
                        any = true;
                    }
                }
                if !any {
                    return Err(Error::EmptyMask);
                }
            }
        }
        Ok((lo, hi))
    }

    /// Per-pixel finite-difference gradient.
    ///
    /// Central differences at interior pixels, one-sided differences on the
    /// image border. Requires at least 2 pixels along each axis.
    pub fn gradient(&self) -> Result<GradientField> {
        let (w, h) = (self.width, self.height);
        if w < 2 || h < 2 {
            return Err(Error::TooSmallForGradient { width: w, height: h });
        }
        let mut gx = vec![0.0; self.data.len()];
        let mut gy = vec![0.0; self.data.len()];
        for y in 0..h {
            let row = y * w;
            for x in 0..w {
                let i = row + x;
                gx[i] = if x == 0 {
                    self.data[i + 1] - self.data[i]
                } else if x == w - 1 {
                    self.data[i] - self.data[i - 1]
                } else {
                    (self.data[i + 1] - self.data[i - 1]) * 0.5
                };
                gy[i] = if y == 0 {
                    self.data[i + w] - self.data[i]
                } else if y == h - 1 {
                    self.data[i] - self.data[i - w]
                } else {
                    (self.data[i + w] - self.data[i - w]) * 0.5
                };
            }
        }
        Ok(GradientField { width: w, height: h, gx, gy })
    }
}

/// A binary pixel set with the same layout as [`Image`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, fill: bool) -> Result<Self> {
        let len = checked_len(width, height)?;
        Ok(Mask { width, height, data: vec![fill; len] })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        let len = checked_len(width, height)?;
        if data.len() != len {
            return Err(Error::BufferLength { len: data.len(), width, height });
        }
        Ok(Mask { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[self.idx(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        let i = self.idx(x, y);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    /// Number of selected pixels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// True if no pixel is selected.
    pub fn none_set(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// True if every pixel is selected.
    pub fn all_set(&self) -> bool {
        self.data.iter().all(|&b| b)
    }

    pub fn same_shape_as_image(&self, img: &Image) -> bool {
        self.width == img.width && self.height == img.height
    }
}

/// Finite-difference gradient of an image: x- and y-components per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn gx(&self) -> &[f64] {
        &self.gx
    }

    pub fn gy(&self) -> &[f64] {
        &self.gy
    }

    /// Euclidean magnitude at a flat index.
    #[inline]
    pub fn magnitude_at(&self, i: usize) -> f64 {
        self.gx[i].hypot(self.gy[i])
    }
}

fn checked_len(width: usize, height: usize) -> Result<usize> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    width
        .checked_mul(height)
        .ok_or(Error::InvalidDimensions { width, height })
}

pub(crate) fn check_mask_shape(width: usize, height: usize, mask: &Mask) -> Result<()> {
    if mask.width != width || mask.height != height {
        return Err(Error::DimensionMismatch {
            expected_width: width,
            expected_height: height,
            got_width: mask.width,
            got_height: mask.height,
        });
    }
    Ok(())
}

pub(crate) fn check_image_shape(expected: &Image, got: &Image) -> Result<()> {
    if !expected.same_shape(got) {
        return Err(Error::DimensionMismatch {
            expected_width: expected.width,
            expected_height: expected.height,
            got_width: got.width,
            got_height: got.height,
        });
    }
    Ok(())
}
