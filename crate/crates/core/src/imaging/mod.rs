//! RGB images and the deterministic texture operations used by the jitter
//! engine and the robustness distortions.
//!
//! Every operation converts to a 64-bit float working buffer, filters with
//! reflect-101 borders and quantizes back to 8 bits exactly once. All of them
//! preserve width, height and channel count.

mod deblock;
mod filter;
mod jpeg;
mod resample;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::Rect;

pub use deblock::deblock;
pub use filter::{gaussian_blur, gaussian_kernel, motion_blur, motion_kernel, sharpen, SHARPEN_KERNEL};
pub use jpeg::jpeg_roundtrip;
pub use resample::{downsample_blur, resize_bilinear};

pub const CHANNELS: usize = 3;

/// Interleaved 8-bit RGB image, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl core::fmt::Debug for Image {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Image {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(param("dimensions", "width and height must be at least 1"));
        }
        let expected = width as usize * height as usize * CHANNELS;
        if data.len() != expected {
            return Err(Error::Dimension {
                expected: alloc::format!("{expected} samples"),
                actual: alloc::format!("{} samples", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * CHANNELS)
            .collect();
        Self {
            width,
            height,
            data,
        }
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * CHANNELS
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + CHANNELS].copy_from_slice(&rgb);
    }

    pub fn crop(&self, rect: Rect) -> Result<Image> {
        if rect.is_empty() || !rect.fits_in(self.width, self.height) {
            return Err(Error::OutOfBounds {
                region: alloc::format!("{rect}"),
                width: self.width,
                height: self.height,
            });
        }
        let mut data = Vec::with_capacity(rect.w as usize * rect.h as usize * CHANNELS);
        for y in rect.y..rect.bottom() {
            let start = self.offset(rect.x, y);
            data.extend_from_slice(&self.data[start..start + rect.w as usize * CHANNELS]);
        }
        Ok(Image {
            width: rect.w,
            height: rect.h,
            data,
        })
    }

    pub(crate) fn to_float(&self) -> FloatImage {
        FloatImage {
            width: self.width as usize,
            height: self.height as usize,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// Round half away from zero after clamping to `[0, 255]`.
pub fn quantize(v: f64) -> u8 {
    libm::round(v.clamp(0.0, 255.0)) as u8
}

/// Mean absolute difference over every sample, on the 0–255 scale.
pub fn mad(a: &Image, b: &Image) -> Result<f64> {
    same_dims(a, b)?;
    let total: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&p, &q)| u64::from(p.abs_diff(q)))
        .sum();
    Ok(total as f64 / a.data.len() as f64)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    same_dims(a, b)?;
    let sse: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&p, &q)| {
            let d = f64::from(p) - f64::from(q);
            d * d
        })
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / a.data.len() as f64;
    Ok(10.0 * libm::log10(255.0 * 255.0 / mse))
}

fn same_dims(a: &Image, b: &Image) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::Dimension {
            expected: alloc::format!("{}x{}", a.width, a.height),
            actual: alloc::format!("{}x{}", b.width, b.height),
        });
    }
    Ok(())
}

/// Float working copy, interleaved RGB.
#[derive(Clone, Debug)]
pub(crate) struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FloatImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * CHANNELS],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize, c: usize) -> &mut f64 {
        &mut self.data[(y * self.width + x) * CHANNELS + c]
    }

    pub fn quantize(&self) -> Image {
        Image {
            width: self.width as u32,
            height: self.height as u32,
            data: self.data.iter().map(|&v| quantize(v)).collect(),
        }
    }
}

/// Reflect-101 border: `-1 → 1`, `n → n-2`. Handles offsets larger than the
/// signal by folding repeatedly.
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Parameters of the blur / sharpen filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Gaussian { sigma: f64 },
    Downsample { factor: f64 },
    Motion { length: u32, angle: f64 },
    Sharpen { strength: f64 },
}

/// One texture operation with concrete parameters. This is the unit stored
/// in a jitter recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TextureOp {
    GaussianBlur { sigma: f64 },
    DownsampleBlur { factor: f64 },
    MotionBlur { length: u32, angle: f64 },
    Sharpen { strength: f64 },
    Jpeg { quality: u8 },
    Deblock { strength: f64 },
}

impl From<KernelSpec> for TextureOp {
    fn from(k: KernelSpec) -> Self {
        match k {
            KernelSpec::Gaussian { sigma } => TextureOp::GaussianBlur { sigma },
            KernelSpec::Downsample { factor } => TextureOp::DownsampleBlur { factor },
            KernelSpec::Motion { length, angle } => TextureOp::MotionBlur { length, angle },
            KernelSpec::Sharpen { strength } => TextureOp::Sharpen { strength },
        }
    }
}

impl TextureOp {
    pub fn apply(&self, img: &Image) -> Result<Image> {
        match *self {
            TextureOp::GaussianBlur { sigma } => gaussian_blur(img, sigma),
            TextureOp::DownsampleBlur { factor } => downsample_blur(img, factor),
            TextureOp::MotionBlur { length, angle } => motion_blur(img, length, angle),
            TextureOp::Sharpen { strength } => sharpen(img, strength),
            TextureOp::Jpeg { quality } => jpeg_roundtrip(img, quality),
            TextureOp::Deblock { strength } => deblock(img, strength),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TextureOp::GaussianBlur { .. } => "gaussian_blur",
            TextureOp::DownsampleBlur { .. } => "downsample_blur",
            TextureOp::MotionBlur { .. } => "motion_blur",
            TextureOp::Sharpen { .. } => "sharpen",
            TextureOp::Jpeg { .. } => "jpeg",
            TextureOp::Deblock { .. } => "deblock",
        }
    }
}

pub(crate) fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        return Err(param(name, alloc::format!("{v} is outside [0, 1]")));
    }
    Ok(())
}
