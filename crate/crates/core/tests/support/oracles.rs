//! Reference implementations written for clarity, not speed: dense 2-D
//! kernels, explicit mirroring, per-pixel bilinear weights and brute-force
//! mask counting.

#![allow(dead_code)]

use ostf_core::Image;
use rand::Rng;

pub fn random_image<R: Rng>(rng: &mut R, max_side: u32) -> Image {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let data = (0..w * h * 3).map(|_| rng.random::<u8>()).collect();
    Image::new(w, h, data).unwrap()
}

/// Mirror without repeating the edge sample, one fold at a time.
pub fn mirror(mut i: i64, n: i64) -> i64 {
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i;
        }
    }
}

/// Dense kernel indexed `k[dy + r][dx + r]`.
pub struct Kernel2d {
    pub radius: i64,
    pub taps: Vec<Vec<f64>>,
}

pub fn convolve(img: &Image, k: &Kernel2d) -> Vec<f64> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut out = vec![0.0; (w * h * 3) as usize];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for dy in -k.radius..=k.radius {
                    for dx in -k.radius..=k.radius {
                        let t = k.taps[(dy + k.radius) as usize][(dx + k.radius) as usize];
                        if t == 0.0 {
                            continue;
                        }
                        let sx = mirror(x + dx, w) as u32;
                        let sy = mirror(y + dy, h) as u32;
                        acc += t * f64::from(img.pixel(sx, sy)[c]);
                    }
                }
                out[((y * w + x) * 3 + c as i64) as usize] = acc;
            }
        }
    }
    out
}

pub fn gaussian_2d(sigma: f64) -> Kernel2d {
    let radius = ((3.0 * sigma).ceil() as i64).max(1);
    let n = (2 * radius + 1) as usize;
    let mut taps = vec![vec![0.0; n]; n];
    let mut sum = 0.0;
    for (j, row) in taps.iter_mut().enumerate() {
        for (i, t) in row.iter_mut().enumerate() {
            let dx = i as f64 - radius as f64;
            let dy = j as f64 - radius as f64;
            *t = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            sum += *t;
        }
    }
    taps.iter_mut().flatten().for_each(|t| *t /= sum);
    Kernel2d { radius, taps }
}

/// Line of `length` unit-spaced samples centred on the origin, snapped to
/// the nearest pixel (ties up/right), each weighing `1/length`.
pub fn motion_2d(length: u32, angle_deg: f64) -> Kernel2d {
    let radius = i64::from(length);
    let n = (2 * radius + 1) as usize;
    let mut taps = vec![vec![0.0; n]; n];
    let a = angle_deg.to_radians();
    for t in 0..length {
        let off = f64::from(t) - (f64::from(length) - 1.0) / 2.0;
        let dx = (off * a.cos() + 0.5).floor() as i64;
        let dy = (-off * a.sin() + 0.5).floor() as i64;
        taps[(dy + radius) as usize][(dx + radius) as usize] += 1.0 / f64::from(length);
    }
    Kernel2d { radius, taps }
}

/// Identity blended with the 4-neighbour Laplacian sharpener.
pub fn sharpen_2d(strength: f64) -> Kernel2d {
    let s = strength;
    Kernel2d {
        radius: 1,
        taps: vec![vec![0.0, -s, 0.0], vec![-s, 1.0 + 4.0 * s, -s], vec![0.0, -s, 0.0]],
    }
}

pub fn to_u8(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

pub fn quantized(values: &[f64]) -> Vec<u8> {
    values.iter().map(|&v| to_u8(v)).collect()
}

/// Largest per-sample difference.
pub fn max_lsb(a: &[u8], b: &[u8]) -> u8 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}

/// Bilinear sample of the continuous image at destination pixel centre.
pub fn bilinear(img: &Image, w: u32, h: u32) -> Vec<f64> {
    let (sw, sh) = (img.width() as f64, img.height() as f64);
    let mut out = Vec::with_capacity((w * h * 3) as usize);
    for y in 0..h {
        for x in 0..w {
            let u = ((x as f64 + 0.5) * sw / w as f64 - 0.5).max(0.0).min(sw - 1.0);
            let v = ((y as f64 + 0.5) * sh / h as f64 - 0.5).max(0.0).min(sh - 1.0);
            let (x0, y0) = (u.floor(), v.floor());
            let (x1, y1) = ((x0 + 1.0).min(sw - 1.0), (y0 + 1.0).min(sh - 1.0));
            let (fx, fy) = (u - x0, v - y0);
            for c in 0..3 {
                let p = |xx: f64, yy: f64| f64::from(img.pixel(xx as u32, yy as u32)[c]);
                let val = p(x0, y0) * (1.0 - fx) * (1.0 - fy)
                    + p(x1, y0) * fx * (1.0 - fy)
                    + p(x0, y1) * (1.0 - fx) * fy
                    + p(x1, y1) * fx * fy;
                out.push(val);
            }
        }
    }
    out
}

/// `(tp, fp, fn)` by visiting every pixel.
pub fn brute_counts(pred: &[Vec<bool>], gt: &[Vec<bool>]) -> (u64, u64, u64) {
    let (mut tp, mut fp, mut fne) = (0, 0, 0);
    for (pr, gr) in pred.iter().zip(gt) {
        for (&p, &g) in pr.iter().zip(gr) {
            tp += u64::from(p && g);
            fp += u64::from(p && !g);
            fne += u64::from(!p && g);
        }
    }
    (tp, fp, fne)
}

/// IoU of two axis-aligned integer rectangles `(x, y, w, h)` in percent.
pub fn rect_iou(a: (u32, u32, u32, u32), b: (u32, u32, u32, u32)) -> f64 {
    let ix = (a.0 + a.2).min(b.0 + b.2).saturating_sub(a.0.max(b.0));
    let iy = (a.1 + a.3).min(b.1 + b.3).saturating_sub(a.1.max(b.1));
    let inter = f64::from(ix * iy);
    let union = f64::from(a.2 * a.3) + f64::from(b.2 * b.3) - inter;
    if union == 0.0 {
        100.0
    } else {
        100.0 * inter / union
    }
}
