//! Lossy stages of a baseline JPEG encode followed by a decode.
//!
//! Colour conversion, 8-bit sample rounding, level shift, 8×8 DCT,
//! quantization with the IJG tables scaled by quality, dequantization and
//! inverse DCT. Huffman coding is lossless and therefore skipped: the output
//! is what a decoder would reconstruct from a 4:4:4 baseline stream.

use alloc::vec;
use alloc::vec::Vec;

use super::{quantize, Image, CHANNELS};
use crate::error::{param, Result};

const LUMA_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

const CHROMA_TABLE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// IJG quality scaling, clamped to the baseline range `[1, 255]`.
pub(crate) fn scaled_table(base: &[u16; 64], quality: u8) -> [f64; 64] {
    let q = u32::from(quality);
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    base.map(|t| f64::from(((u32::from(t) * scale + 50) / 100).clamp(1, 255)))
}

/// Orthonormal DCT-II basis: `basis[u][x] = c(u)/2 · cos((2x+1)uπ/16)`.
fn dct_basis() -> [[f64; 8]; 8] {
    let mut m = [[0.0; 8]; 8];
    for (u, row) in m.iter_mut().enumerate() {
        let cu = if u == 0 { core::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
        for (x, v) in row.iter_mut().enumerate() {
            *v = cu / 2.0
                * libm::cos((2 * x + 1) as f64 * u as f64 * core::f64::consts::PI / 16.0);
        }
    }
    m
}

fn transform_block(basis: &[[f64; 8]; 8], block: &mut [f64; 64], table: &[f64; 64]) {
    let mut tmp = [0.0; 64];
    // Forward: F = B f Bᵀ.
    for u in 0..8 {
        for x in 0..8 {
            tmp[u * 8 + x] = (0..8).map(|y| basis[u][y] * block[y * 8 + x]).sum();
        }
    }
    let mut coef = [0.0; 64];
    for u in 0..8 {
        for v in 0..8 {
            let f: f64 = (0..8).map(|x| tmp[u * 8 + x] * basis[v][x]).sum();
            let q = table[u * 8 + v];
            coef[u * 8 + v] = libm::round(f / q) * q;
        }
    }
    // Inverse: f = Bᵀ F B.
    for y in 0..8 {
        for v in 0..8 {
            tmp[y * 8 + v] = (0..8).map(|u| basis[u][y] * coef[u * 8 + v]).sum();
        }
    }
    for y in 0..8 {
        for x in 0..8 {
            block[y * 8 + x] = (0..8).map(|v| tmp[y * 8 + v] * basis[v][x]).sum();
        }
    }
}

/// Runs one 8-bit plane through DCT → quantize → IDCT, in place.
fn process_plane(plane: &mut [u8], width: usize, height: usize, table: &[f64; 64]) {
    let basis = dct_basis();
    let mut block = [0.0; 64];
    for by in (0..height).step_by(8) {
        for bx in (0..width).step_by(8) {
            for y in 0..8 {
                let sy = (by + y).min(height - 1);
                for x in 0..8 {
                    let sx = (bx + x).min(width - 1);
                    block[y * 8 + x] = f64::from(plane[sy * width + sx]) - 128.0;
                }
            }
            transform_block(&basis, &mut block, table);
            for y in 0..8.min(height - by) {
                for x in 0..8.min(width - bx) {
                    plane[(by + y) * width + bx + x] = quantize(block[y * 8 + x] + 128.0);
                }
            }
        }
    }
}

/// Encode at `quality` (1–100) and decode back.
pub fn jpeg_roundtrip(img: &Image, quality: u8) -> Result<Image> {
    if !(1..=100).contains(&quality) {
        return Err(param("quality", alloc::format!("{quality} is outside [1, 100]")));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let n = w * h;
    let mut planes = [vec![0u8; n], vec![0u8; n], vec![0u8; n]];
    for (i, px) in img.as_raw().chunks_exact(CHANNELS).enumerate() {
        let (r, g, b) = (f64::from(px[0]), f64::from(px[1]), f64::from(px[2]));
        planes[0][i] = quantize(0.299 * r + 0.587 * g + 0.114 * b);
        planes[1][i] = quantize(-0.168_736 * r - 0.331_264 * g + 0.5 * b + 128.0);
        planes[2][i] = quantize(0.5 * r - 0.418_688 * g - 0.081_312 * b + 128.0);
    }
    let luma = scaled_table(&LUMA_TABLE, quality);
    let chroma = scaled_table(&CHROMA_TABLE, quality);
    process_plane(&mut planes[0], w, h, &luma);
    process_plane(&mut planes[1], w, h, &chroma);
    process_plane(&mut planes[2], w, h, &chroma);

    let mut data: Vec<u8> = Vec::with_capacity(n * CHANNELS);
    for ((&y, &cb), &cr) in planes[0].iter().zip(&planes[1]).zip(&planes[2]) {
        let y = f64::from(y);
        let cb = f64::from(cb) - 128.0;
        let cr = f64::from(cr) - 128.0;
        data.push(quantize(y + 1.402 * cr));
        data.push(quantize(y - 0.344_136 * cb - 0.714_136 * cr));
        data.push(quantize(y + 1.772 * cb));
    }
    Image::new(img.width(), img.height(), data)
}
