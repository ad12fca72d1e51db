use super::{FloatImage, Image, CHANNELS};
use crate::error::{param, Result};

/// Source coordinate and blend weight along one axis, half-pixel centres.
#[inline]
fn source_pos(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = libm::floor(s) as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

pub(crate) fn resize_float(src: &FloatImage, width: usize, height: usize) -> FloatImage {
    let mut out = FloatImage::zeros(width, height);
    let xs: alloc::vec::Vec<_> = (0..width).map(|x| source_pos(x, src.width, width)).collect();
    for y in 0..height {
        let (y0, y1, fy) = source_pos(y, src.height, height);
        for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
            for c in 0..CHANNELS {
                let top = src.at(x0, y0, c) * (1.0 - fx) + src.at(x1, y0, c) * fx;
                let bottom = src.at(x0, y1, c) * (1.0 - fx) + src.at(x1, y1, c) * fx;
                *out.at_mut(x, y, c) = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    out
}

/// Bilinear resize with half-pixel centres and edge clamping (no antialias).
pub fn resize_bilinear(img: &Image, width: u32, height: u32) -> Result<Image> {
    if width == 0 || height == 0 {
        return Err(param("size", "target dimensions must be >= 1"));
    }
    if (width, height) == img.dimensions() {
        return Ok(img.clone());
    }
    Ok(resize_float(&img.to_float(), width as usize, height as usize).quantize())
}

/// Bilinear down to `ceil(w/factor) × ceil(h/factor)` and back up, keeping
/// the intermediate in float.
pub fn downsample_blur(img: &Image, factor: f64) -> Result<Image> {
    if !factor.is_finite() || factor <= 1.0 {
        return Err(param("factor", alloc::format!("{factor} must be finite and > 1")));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let sw = (libm::ceil(w as f64 / factor) as usize).max(1);
    let sh = (libm::ceil(h as f64 / factor) as usize).max(1);
    let small = resize_float(&img.to_float(), sw, sh);
    Ok(resize_float(&small, w, h).quantize())
}
