//! Texture Jitter: pick authentic text instances, perturb their micro
//! texture with size-adaptive intensity while keeping the macro appearance,
//! splice them back with feathered edges and relabel them tampered.
//!
//! Everything is a pure function of `(image, annotations, config, image_id)`.
//! The per-image generator is seeded from SHA-256 of the global seed and the
//! image id, so results do not depend on how images are scheduled.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{param, Error, Result};
use crate::geometry::Rect;
use crate::imaging::{self, quantize, Image, TextureOp, CHANNELS};

pub use crate::dataset::{Geometry, Label, TextInstance};

/// Accepted range for the mean absolute difference between a source crop and
/// its jittered version, on the 0–255 scale.
pub const MAD_MIN: f64 = 1.0;
pub const MAD_MAX: f64 = 24.0;

/// Re-draws allowed after the first recipe is rejected.
pub const MAX_REDRAWS: usize = 5;

/// Probability that a recipe has two ops instead of one.
pub const TWO_OP_PROB: f64 = 0.3;

const DEBLOCK_STRENGTH: [f64; 2] = [0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntensityParams {
    pub blur_sigma_range: [f64; 2],
    pub jpeg_quality_range: [u8; 2],
    pub sharpen_strength_range: [f64; 2],
    pub feather_width: u32,
}

impl IntensityParams {
    fn validate(&self) -> Result<()> {
        let [slo, shi] = self.blur_sigma_range;
        if !(slo.is_finite() && shi.is_finite() && slo > 0.0 && slo <= shi) {
            return Err(Error::Config(alloc::format!("bad blur_sigma_range {:?}", self.blur_sigma_range)));
        }
        let [qlo, qhi] = self.jpeg_quality_range;
        if !(1 <= qlo && qlo <= qhi && qhi <= 100) {
            return Err(Error::Config(alloc::format!("bad jpeg_quality_range {:?}", self.jpeg_quality_range)));
        }
        let [klo, khi] = self.sharpen_strength_range;
        if !(0.0 <= klo && klo <= khi && khi <= 1.0) {
            return Err(Error::Config(alloc::format!(
                "bad sharpen_strength_range {:?}",
                self.sharpen_strength_range
            )));
        }
        Ok(())
    }
}

/// Intensity used for texts whose scale `sqrt(w·h)` is at most `max_scale`.
/// `None` means unbounded and is only meaningful on the last bucket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeBucket {
    pub max_scale: Option<f64>,
    pub params: IntensityParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JitterConfig {
    pub selection_prob: f64,
    pub min_text_side: u32,
    pub size_buckets: Vec<SizeBucket>,
    pub global_seed: u64,
}

impl Default for JitterConfig {
    fn default() -> Self {
        let bucket = |max_scale, sigma, q, sharp, feather| SizeBucket {
            max_scale,
            params: IntensityParams {
                blur_sigma_range: sigma,
                jpeg_quality_range: q,
                sharpen_strength_range: sharp,
                feather_width: feather,
            },
        };
        Self {
            selection_prob: 0.5,
            min_text_side: 8,
            size_buckets: alloc::vec![
                bucket(Some(32.0), [0.4, 0.8], [75, 90], [0.2, 0.5], 1),
                bucket(Some(96.0), [0.8, 1.6], [55, 80], [0.3, 0.7], 2),
                bucket(None, [1.2, 2.4], [35, 65], [0.5, 1.0], 3),
            ],
            global_seed: 0,
        }
    }
}

impl JitterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.selection_prob) {
            return Err(Error::Config(alloc::format!(
                "selection_prob {} outside [0, 1]",
                self.selection_prob
            )));
        }
        if self.size_buckets.is_empty() {
            return Err(Error::Config("size_buckets is empty".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, b) in self.size_buckets.iter().enumerate() {
            b.params.validate()?;
            match b.max_scale {
                Some(s) if s.is_finite() && s > prev => prev = s,
                None if i + 1 == self.size_buckets.len() => {}
                _ => {
                    return Err(Error::Config(alloc::format!(
                        "size bucket {i}: max_scale must be finite and ascending (only the last may be open)"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Full provenance for one jittered instance. Replaying the recipes of an
/// image, in order, on the original image reproduces the output exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterRecipe {
    pub instance_index: usize,
    pub ops: Vec<TextureOp>,
    pub feather_width: u32,
    pub seed: u64,
    /// Pixel region spliced back (the instance bbox).
    pub region: Rect,
    /// Region cropped and filtered (the bbox grown by `feather_width`).
    pub context: Rect,
    /// 1-based draw that was accepted.
    pub attempts: usize,
    pub mad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum JitterEvent {
    FeatherClamped { instance: usize, requested: u32, used: u32 },
    Skipped { instance: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct JitterOutput {
    pub image: Image,
    pub instances: Vec<TextInstance>,
    pub recipes: Vec<JitterRecipe>,
    pub events: Vec<JitterEvent>,
}

impl JitterOutput {
    pub fn skipped(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, JitterEvent::Skipped { .. }))
            .count()
    }
}

/// Seed for one image: SHA-256 over the little-endian global seed followed by
/// the image id bytes.
pub fn image_seed(global_seed: u64, image_id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(image_id.as_bytes());
    h.finalize().into()
}

/// Independently selects each eligible instance (authentic, shorter bbox side
/// at least `min_text_side`) with probability `selection_prob`.
pub fn select_targets<R: Rng + ?Sized>(
    instances: &[TextInstance],
    config: &JitterConfig,
    rng: &mut R,
) -> Vec<usize> {
    let min_side = f64::from(config.min_text_side);
    instances
        .iter()
        .enumerate()
        .filter(|(_, inst)| {
            let b = inst.bbox();
            inst.label == Label::Authentic && b.w.min(b.h) >= min_side
        })
        .filter(|_| rng.random::<f64>() < config.selection_prob)
        .map(|(i, _)| i)
        .collect()
}

/// Intensity of the first bucket whose `max_scale` is at least
/// `sqrt(text_w · text_h)`; the last bucket otherwise.
pub fn compute_intensity(text_w: u32, text_h: u32, config: &JitterConfig) -> Result<IntensityParams> {
    let last = config
        .size_buckets
        .last()
        .ok_or_else(|| Error::Config("size_buckets is empty".into()))?;
    if text_w == 0 || text_h == 0 {
        return Err(param("text size", "width and height must be >= 1"));
    }
    let scale = libm::sqrt(f64::from(text_w) * f64::from(text_h));
    Ok(config
        .size_buckets
        .iter()
        .find(|b| b.max_scale.is_some_and(|m| scale <= m))
        .unwrap_or(last)
        .params)
}

fn draw_op<R: Rng + ?Sized>(rng: &mut R, p: &IntensityParams) -> TextureOp {
    let [slo, shi] = p.blur_sigma_range;
    match rng.random_range(0..4u8) {
        0 => match rng.random_range(0..3u8) {
            0 => TextureOp::GaussianBlur {
                sigma: rng.random_range(slo..=shi),
            },
            1 => TextureOp::DownsampleBlur {
                factor: rng.random_range(1.0 + slo..=1.0 + shi),
            },
            _ => {
                let len = |s: f64| (libm::round(2.0 * s) as u32 + 1).max(2);
                TextureOp::MotionBlur {
                    length: rng.random_range(len(slo)..=len(shi)),
                    angle: rng.random_range(0.0..180.0),
                }
            }
        },
        1 => TextureOp::Sharpen {
            strength: rng.random_range(p.sharpen_strength_range[0]..=p.sharpen_strength_range[1]),
        },
        2 => TextureOp::Jpeg {
            quality: rng.random_range(p.jpeg_quality_range[0]..=p.jpeg_quality_range[1]),
        },
        _ => TextureOp::Deblock {
            strength: rng.random_range(DEBLOCK_STRENGTH[0]..=DEBLOCK_STRENGTH[1]),
        },
    }
}

/// One op with probability 0.7, two with probability 0.3, applied in draw
/// order.
pub fn draw_ops<R: Rng + ?Sized>(rng: &mut R, params: &IntensityParams) -> Vec<TextureOp> {
    let n = if rng.random::<f64>() < TWO_OP_PROB { 2 } else { 1 };
    (0..n).map(|_| draw_op(rng, params)).collect()
}

/// Applies ops in order.
pub fn apply_ops(crop: &Image, ops: &[TextureOp]) -> Result<Image> {
    let mut out = crop.clone();
    for op in ops {
        out = op.apply(&out)?;
    }
    Ok(out)
}

pub fn apply_jitter(crop: &Image, recipe: &JitterRecipe) -> Result<Image> {
    apply_ops(crop, &recipe.ops)
}

/// Feathering weight of pixel `(x, y)` inside a `w × h` region: 1 once the
/// pixel is `feather` or more pixels from the border, `d / feather` closer
/// in, 0 on the outermost ring.
pub fn feather_alpha(x: u32, y: u32, w: u32, h: u32, feather: u32) -> f64 {
    if feather == 0 {
        return 1.0;
    }
    let d = x.min(y).min(w - 1 - x).min(h - 1 - y);
    (f64::from(d) / f64::from(feather)).min(1.0)
}

/// Alpha-composites `patch` over `region` of `img`. Pixels outside the
/// region are copied unchanged.
pub fn feather_splice(img: &Image, region: Rect, patch: &Image, feather_width: u32) -> Result<Image> {
    if region.is_empty() || !region.fits_in(img.width(), img.height()) {
        return Err(Error::OutOfBounds {
            region: alloc::format!("{region}"),
            width: img.width(),
            height: img.height(),
        });
    }
    if patch.dimensions() != (region.w, region.h) {
        return Err(Error::Dimension {
            expected: alloc::format!("{}x{}", region.w, region.h),
            actual: alloc::format!("{}x{}", patch.width(), patch.height()),
        });
    }
    let mut out = img.clone();
    for py in 0..region.h {
        for px in 0..region.w {
            let a = feather_alpha(px, py, region.w, region.h, feather_width);
            if a == 0.0 {
                continue;
            }
            let (x, y) = (region.x + px, region.y + py);
            let base = img.pixel(x, y);
            let top = patch.pixel(px, py);
            let mut rgb = [0u8; CHANNELS];
            for c in 0..CHANNELS {
                rgb[c] = quantize(a * f64::from(top[c]) + (1.0 - a) * f64::from(base[c]));
            }
            out.set_pixel(x, y, rgb);
        }
    }
    Ok(out)
}

/// Crop `context`, run `ops`, cut the `region` part back out.
fn jitter_patch(img: &Image, region: Rect, context: Rect, ops: &[TextureOp]) -> Result<(Image, Image)> {
    let crop = img.crop(context)?;
    let out = apply_ops(&crop, ops)?;
    let inner = Rect::new(region.x - context.x, region.y - context.y, region.w, region.h);
    Ok((crop.crop(inner)?, out.crop(inner)?))
}

/// Jitters one image. Selected instances are relabeled tampered; skipped
/// ones (no acceptable recipe, empty bbox) keep their label and pixels.
pub fn jitter_image(
    img: &Image,
    instances: &[TextInstance],
    config: &JitterConfig,
    image_id: &str,
) -> Result<JitterOutput> {
    config.validate()?;
    let (w, h) = img.dimensions();
    let mut rng = ChaCha8Rng::from_seed(image_seed(config.global_seed, image_id));
    let targets = select_targets(instances, config, &mut rng);

    let mut current = img.clone();
    let mut labels = instances.to_vec();
    let mut recipes = Vec::new();
    let mut events = Vec::new();

    for index in targets {
        let seed = rng.next_u64();
        let region = instances[index].bbox().pixel_rect(w, h);
        if region.is_empty() {
            events.push(JitterEvent::Skipped {
                instance: index,
                reason: "bbox empty after clamping".into(),
            });
            continue;
        }
        let params = compute_intensity(region.w, region.h, config)?;
        let max_feather = region.w.min(region.h) / 2;
        let feather = params.feather_width.min(max_feather);
        if feather < params.feather_width {
            events.push(JitterEvent::FeatherClamped {
                instance: index,
                requested: params.feather_width,
                used: feather,
            });
        }
        let context = region.expand(feather, w, h);

        let mut inst_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut accepted = None;
        for attempt in 1..=MAX_REDRAWS + 1 {
            let ops = draw_ops(&mut inst_rng, &params);
            let (src, patch) = jitter_patch(&current, region, context, &ops)?;
            let m = imaging::mad(&src, &patch)?;
            if (MAD_MIN..=MAD_MAX).contains(&m) {
                accepted = Some((ops, patch, attempt, m));
                break;
            }
        }
        let Some((ops, patch, attempts, mad)) = accepted else {
            events.push(JitterEvent::Skipped {
                instance: index,
                reason: alloc::format!("no recipe within MAD [{MAD_MIN}, {MAD_MAX}] after {} draws", MAX_REDRAWS + 1),
            });
            continue;
        };
        current = feather_splice(&current, region, &patch, feather)?;
        labels[index].label = Label::Tampered;
        recipes.push(JitterRecipe {
            instance_index: index,
            ops,
            feather_width: feather,
            seed,
            region,
            context,
            attempts,
            mad,
        });
    }

    Ok(JitterOutput {
        image: current,
        instances: labels,
        recipes,
        events,
    })
}

/// Re-applies stored recipes, in order, to the original image.
pub fn replay(img: &Image, recipes: &[JitterRecipe]) -> Result<Image> {
    let mut current = img.clone();
    for r in recipes {
        let (_, patch) = jitter_patch(&current, r.region, r.context, &r.ops)?;
        current = feather_splice(&current, r.region, &patch, r.feather_width)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use alloc::vec;

    fn boxed(x: f64, y: f64, w: f64, h: f64) -> TextInstance {
        TextInstance::authentic(Geometry::Box(BBox::new(x, y, w, h)))
    }

    fn textured(w: u32, h: u32, salt: u32) -> Image {
        Image::from_fn(w, h, |x, y| {
            let v = x.wrapping_mul(73) ^ y.wrapping_mul(151) ^ salt.wrapping_mul(2654435761);
            let v = v.wrapping_mul(2246822519) >> 13;
            [(v & 0xff) as u8, ((v >> 8) & 0xff) as u8, ((v >> 16) & 0xff) as u8]
        })
    }

    #[test]
    fn selection_extremes() {
        let insts: Vec<_> = (0..20).map(|i| boxed(f64::from(i), 0.0, 10.0, 10.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = JitterConfig {
            selection_prob: 0.0,
            ..JitterConfig::default()
        };
        assert!(select_targets(&insts, &cfg, &mut rng).is_empty());
        let cfg = JitterConfig {
            selection_prob: 1.0,
            ..JitterConfig::default()
        };
        assert_eq!(select_targets(&insts, &cfg, &mut rng), (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn selection_skips_small_and_tampered() {
        let mut insts = vec![boxed(0.0, 0.0, 7.0, 30.0), boxed(0.0, 0.0, 8.0, 8.0), boxed(0.0, 0.0, 30.0, 30.0)];
        insts[2].label = Label::Tampered;
        let cfg = JitterConfig {
            selection_prob: 1.0,
            ..JitterConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_targets(&insts, &cfg, &mut rng), [1]);
    }

    #[test]
    fn intensity_buckets() {
        let cfg = JitterConfig::default();
        let small = compute_intensity(10, 10, &cfg).unwrap();
        assert_eq!(small.feather_width, 1);
        // sqrt(64·32) ≈ 45.25 lands in the medium bucket.
        let medium = compute_intensity(64, 32, &cfg).unwrap();
        assert_eq!(medium.blur_sigma_range, [0.8, 1.6]);
        assert_eq!(medium.feather_width, 2);
        let large = compute_intensity(1000, 500, &cfg).unwrap();
        assert_eq!(large.jpeg_quality_range, [35, 65]);
        let empty = JitterConfig {
            size_buckets: vec![],
            ..JitterConfig::default()
        };
        assert!(matches!(compute_intensity(5, 5, &empty), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        assert!(JitterConfig::default().validate().is_ok());
        let mut cfg = JitterConfig::default();
        cfg.size_buckets.swap(0, 1);
        assert!(cfg.validate().is_err());
        let mut cfg = JitterConfig::default();
        cfg.size_buckets[0].params.jpeg_quality_range = [90, 75];
        assert!(cfg.validate().is_err());
        let cfg = JitterConfig {
            selection_prob: 1.5,
            ..JitterConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn feather_examples() {
        let img = Image::filled(12, 12, [0; 3]);
        let patch = Image::filled(8, 8, [255; 3]);
        let region = Rect::new(2, 2, 8, 8);
        let out = feather_splice(&img, region, &patch, 2).unwrap();
        assert!(feather_alpha(0, 0, 8, 8, 2) < 1.0);
        assert!(out.pixel(2, 2)[0] < 255);
        assert_eq!(out.pixel(2 + 4, 2 + 4), [255; 3]);
        assert_eq!(out.pixel(3, 3), [128; 3]);
        assert_eq!(out.pixel(1, 5), [0; 3]);

        let hard = feather_splice(&img, region, &patch, 0).unwrap();
        for y in 0..12 {
            for x in 0..12 {
                let want = if region.contains(x, y) { 255 } else { 0 };
                assert_eq!(hard.pixel(x, y), [want; 3]);
            }
        }
    }

    #[test]
    fn splice_of_identical_patch_is_identity() {
        let img = textured(20, 16, 1);
        let region = Rect::new(3, 4, 10, 9);
        let patch = img.crop(region).unwrap();
        assert_eq!(feather_splice(&img, region, &patch, 3).unwrap(), img);
    }

    #[test]
    fn splice_errors() {
        let img = Image::filled(10, 10, [0; 3]);
        let patch = Image::filled(4, 4, [0; 3]);
        assert!(matches!(
            feather_splice(&img, Rect::new(8, 8, 4, 4), &patch, 1),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            feather_splice(&img, Rect::new(0, 0, 5, 4), &patch, 1),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_selection_leaves_image_untouched() {
        let img = textured(64, 48, 2);
        let insts = vec![boxed(4.0, 4.0, 30.0, 12.0)];
        let cfg = JitterConfig {
            selection_prob: 0.0,
            ..JitterConfig::default()
        };
        let out = jitter_image(&img, &insts, &cfg, "img-0").unwrap();
        assert_eq!(out.image, img);
        assert_eq!(out.instances, insts);
        assert!(out.recipes.is_empty());
    }

    #[test]
    fn jitter_relabels_and_replays() {
        let img = textured(96, 64, 7);
        let insts = vec![boxed(4.0, 4.0, 40.0, 16.0), boxed(50.0, 30.0, 30.0, 20.0), boxed(2.0, 40.0, 5.0, 5.0)];
        let cfg = JitterConfig {
            selection_prob: 1.0,
            global_seed: 11,
            ..JitterConfig::default()
        };
        let out = jitter_image(&img, &insts, &cfg, "a.png").unwrap();
        assert_eq!(out.recipes.len() + out.skipped(), 2);
        for r in &out.recipes {
            assert_eq!(out.instances[r.instance_index].label, Label::Tampered);
            assert!((MAD_MIN..=MAD_MAX).contains(&r.mad));
            assert!(!r.ops.is_empty() && r.ops.len() <= 2);
        }
        assert_eq!(out.instances[2].label, Label::Authentic);
        for (a, b) in out.instances.iter().zip(&insts) {
            assert_eq!(a.geometry, b.geometry);
        }
        assert_eq!(replay(&img, &out.recipes).unwrap(), out.image);

        let again = jitter_image(&img, &insts, &cfg, "a.png").unwrap();
        assert_eq!(again.image, out.image);
        assert_eq!(again.recipes, out.recipes);
    }

    #[test]
    fn degenerate_recipe_is_identity() {
        let img = textured(16, 16, 3);
        let ops = [TextureOp::Sharpen { strength: 0.0 }];
        let out = apply_ops(&img, &ops).unwrap();
        assert_eq!(out, img);
        assert!(imaging::mad(&img, &out).unwrap() < MAD_MIN);
    }

    #[test]
    fn image_seed_depends_on_both_inputs() {
        assert_ne!(image_seed(1, "a"), image_seed(2, "a"));
        assert_ne!(image_seed(1, "a"), image_seed(1, "b"));
        assert_eq!(image_seed(5, "x"), image_seed(5, "x"));
    }
}
