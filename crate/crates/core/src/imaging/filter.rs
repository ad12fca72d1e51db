use alloc::vec::Vec;

use super::{check_unit, reflect_index, FloatImage, Image, CHANNELS};
use crate::error::{param, Result};

/// Signed sharpening kernel, taps sum to 1.
pub const SHARPEN_KERNEL: [[f64; 3]; 3] = [[0.0, -1.0, 0.0], [-1.0, 5.0, -1.0], [0.0, -1.0, 0.0]];

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = max(1, ceil(3σ))`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (libm::ceil(3.0 * sigma) as usize).max(1);
    let denom = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            libm::exp(-d * d / denom)
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(param("sigma", alloc::format!("{sigma} must be finite and >= 0")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let taps = gaussian_kernel(sigma);
    let f = img.to_float();
    let h = convolve_rows(&f, &taps);
    Ok(convolve_cols(&h, &taps).quantize())
}

fn convolve_rows(src: &FloatImage, taps: &[f64]) -> FloatImage {
    let r = (taps.len() / 2) as isize;
    let mut out = FloatImage::zeros(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (k, &t) in taps.iter().enumerate() {
                    let sx = reflect_index(x as isize + k as isize - r, src.width);
                    acc += t * src.at(sx, y, c);
                }
                *out.at_mut(x, y, c) = acc;
            }
        }
    }
    out
}

fn convolve_cols(src: &FloatImage, taps: &[f64]) -> FloatImage {
    let r = (taps.len() / 2) as isize;
    let mut out = FloatImage::zeros(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for (k, &t) in taps.iter().enumerate() {
                    let sy = reflect_index(y as isize + k as isize - r, src.height);
                    acc += t * src.at(x, sy, c);
                }
                *out.at_mut(x, y, c) = acc;
            }
        }
    }
    out
}

/// Sparse 2-D convolution with `(dx, dy, weight)` taps.
fn convolve_sparse(src: &FloatImage, taps: &[(isize, isize, f64)]) -> FloatImage {
    let mut out = FloatImage::zeros(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for &(dx, dy, w) in taps {
                    let sx = reflect_index(x as isize + dx, src.width);
                    let sy = reflect_index(y as isize + dy, src.height);
                    acc += w * src.at(sx, sy, c);
                }
                *out.at_mut(x, y, c) = acc;
            }
        }
    }
    out
}

/// Rasterized line kernel: `length` samples centred on the origin along
/// `angle` degrees (counter-clockwise, image y pointing down), each with
/// weight `1/length`. Samples landing on the same pixel are merged.
pub fn motion_kernel(length: u32, angle: f64) -> Vec<(isize, isize, f64)> {
    let (s, c) = libm::sincos(angle.to_radians());
    let w = 1.0 / f64::from(length);
    let half = (f64::from(length) - 1.0) / 2.0;
    let mut taps: Vec<(isize, isize, f64)> = Vec::new();
    for t in 0..length {
        let offset = f64::from(t) - half;
        let dx = libm::floor(offset * c + 0.5) as isize;
        let dy = libm::floor(-offset * s + 0.5) as isize;
        match taps.iter_mut().find(|(x, y, _)| *x == dx && *y == dy) {
            Some(tap) => tap.2 += w,
            None => taps.push((dx, dy, w)),
        }
    }
    taps
}

pub fn motion_blur(img: &Image, length: u32, angle: f64) -> Result<Image> {
    if length == 0 {
        return Err(param("length", "motion blur length must be >= 1"));
    }
    if !angle.is_finite() {
        return Err(param("angle", "must be finite"));
    }
    if length == 1 {
        return Ok(img.clone());
    }
    let taps = motion_kernel(length, angle);
    Ok(convolve_sparse(&img.to_float(), &taps).quantize())
}

/// `out = (1 - strength)·img + strength·(img ⊛ SHARPEN_KERNEL)`, clamped.
pub fn sharpen(img: &Image, strength: f64) -> Result<Image> {
    check_unit("strength", strength)?;
    if strength == 0.0 {
        return Ok(img.clone());
    }
    let mut taps = Vec::with_capacity(5);
    for (j, row) in SHARPEN_KERNEL.iter().enumerate() {
        for (i, &k) in row.iter().enumerate() {
            if k != 0.0 {
                taps.push((i as isize - 1, j as isize - 1, k));
            }
        }
    }
    let src = img.to_float();
    let mut out = convolve_sparse(&src, &taps);
    for (o, &s) in out.data.iter_mut().zip(&src.data) {
        *o = (1.0 - strength) * s + strength * *o;
    }
    Ok(out.quantize())
}
