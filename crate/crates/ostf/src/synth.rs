//! Synthetic scenes with text-like strokes, for fixtures and benchmarks.

use std::path::Path;

use ostf_core::dataset::{Geometry, Label, Manifest, Record, TextInstance};
use ostf_core::{BBox, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::io::write_png;

/// Noisy gradient background with `texts` dark-on-light "words": boxes of
/// vertical strokes. About one in five is pre-labeled tampered.
pub fn scene<R: Rng>(rng: &mut R, width: u32, height: u32, texts: usize) -> (Image, Vec<TextInstance>) {
    let tint: [u8; 3] = [rng.random_range(120..220), rng.random_range(120..220), rng.random_range(120..220)];
    let mut img = Image::from_fn(width, height, |x, y| {
        let g = ((x + y) * 40 / (width + height).max(1)) as u8;
        tint.map(|t| t.saturating_add(g))
    });
    for y in 0..height {
        for x in 0..width {
            let n: i16 = rng.random_range(-6..=6);
            let p = img.pixel(x, y).map(|v| (i16::from(v) + n).clamp(0, 255) as u8);
            img.set_pixel(x, y, p);
        }
    }
    let mut instances = Vec::with_capacity(texts);
    for _ in 0..texts {
        let max_w = (width / 2).max(4);
        let bw = rng.random_range(4..=max_w.min(160));
        let bh = rng.random_range(4..=(height / 3).clamp(4, 60));
        let x = rng.random_range(0..=width.saturating_sub(bw));
        let y = rng.random_range(0..=height.saturating_sub(bh));
        let ink: [u8; 3] = [rng.random_range(0..80), rng.random_range(0..80), rng.random_range(0..80)];
        let stroke = (bh / 6).max(1);
        let mut cx = x + stroke;
        while cx + stroke < (x + bw).min(width) {
            let top = y + rng.random_range(0..=bh / 4);
            for px in cx..cx + stroke {
                for py in top..(y + bh).min(height) {
                    img.set_pixel(px, py, ink);
                }
            }
            cx += stroke * rng.random_range(2..4);
        }
        let label = if rng.random_bool(0.2) { Label::Tampered } else { Label::Authentic };
        instances.push(TextInstance {
            geometry: Geometry::Box(BBox::new(f64::from(x), f64::from(y), f64::from(bw), f64::from(bh))),
            label,
            transcription: None,
        });
    }
    (img, instances)
}

/// Writes `count` scenes as `dir/scene_NNNN.png` and returns their manifest.
/// Sizes vary between `min_side` and `max_side`.
pub fn write_fixture(dir: &Path, count: usize, seed: u64, min_side: u32, max_side: u32) -> Result<Manifest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let w = rng.random_range(min_side..=max_side);
        let h = rng.random_range(min_side..=max_side);
        let texts = rng.random_range(1..=8);
        let (img, instances) = scene(&mut rng, w, h, texts);
        let name = format!("scene_{i:04}.png");
        write_png(&dir.join(&name), &img)?;
        records.push(Record {
            image: name,
            width: w,
            height: h,
            instances,
        });
    }
    Ok(Manifest::new(records))
}
