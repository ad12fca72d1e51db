//! Instance- and pixel-level scoring, box rasterization, robustness
//! distortions and the 9×9 cross-session matrix.
//!
//! All scores are on the percent scale. Division by zero yields 0 for
//! precision, recall and F1; pixel IoU is 100 when both maps are empty.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, Record, TamperingMethod, TextInstance};
use crate::error::{param, Error, Result};
use crate::geometry::BBox;
use crate::imaging::{jpeg_roundtrip, resize_bilinear, Image};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub bbox: BBox,
    pub class: Label,
    pub score: f64,
}

/// Detector output for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePredictions {
    pub image: String,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Harmonic mean of two percentages, 0 when both are 0.
pub fn f1_score(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl ClassScores {
    pub fn new(precision: f64, recall: f64) -> Self {
        Self {
            precision,
            recall,
            f1: f1_score(precision, recall),
            iou: None,
        }
    }
}

/// A pair of per-class scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PerClass<T> {
    #[serde(alias = "real")]
    pub authentic: T,
    pub tampered: T,
}

impl<T> PerClass<T> {
    pub fn get(&self, label: Label) -> &T {
        match label {
            Label::Authentic => &self.authentic,
            Label::Tampered => &self.tampered,
        }
    }

    pub fn get_mut(&mut self, label: Label) -> &mut T {
        match label {
            Label::Authentic => &mut self.authentic,
            Label::Tampered => &mut self.tampered,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerClass<U> {
        PerClass {
            authentic: f(&self.authentic),
            tampered: f(&self.tampered),
        }
    }
}

/// Row-major binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Sets every pixel covered by the box (edges rounded, clamped).
    pub fn fill_box(&mut self, b: &BBox) {
        let r = b.pixel_rect(self.width, self.height);
        for y in r.y..r.bottom() {
            let row = y as usize * self.width as usize;
            self.data[row + r.x as usize..row + r.right() as usize].fill(true);
        }
    }
}

/// Two zero maps, one per class; every prediction scoring at least
/// `score_threshold` fills its box in the map of its class.
pub fn rasterize_boxes(preds: &[Prediction], width: u32, height: u32, score_threshold: f64) -> PerClass<Mask> {
    let mut maps = PerClass {
        authentic: Mask::zeros(width, height),
        tampered: Mask::zeros(width, height),
    };
    for p in preds.iter().filter(|p| p.score >= score_threshold) {
        maps.get_mut(p.class).fill_box(&p.bbox);
    }
    maps
}

/// Ground-truth maps built the same way from annotated instance bboxes.
pub fn rasterize_instances(instances: &[TextInstance], width: u32, height: u32) -> PerClass<Mask> {
    let mut maps = PerClass {
        authentic: Mask::zeros(width, height),
        tampered: Mask::zeros(width, height),
    };
    for inst in instances {
        maps.get_mut(inst.label).fill_box(&inst.bbox());
    }
    maps
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl PixelCounts {
    pub fn scores(&self) -> ClassScores {
        let mut s = ClassScores::new(ratio(self.tp, self.tp + self.fp), ratio(self.tp, self.tp + self.fn_));
        let union = self.tp + self.fp + self.fn_;
        s.iou = Some(if union == 0 { 100.0 } else { ratio(self.tp, union) });
        s
    }
}

impl core::ops::AddAssign for PixelCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

pub fn pixel_counts(pred: &Mask, gt: &Mask) -> Result<PixelCounts> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(Error::Dimension {
            expected: alloc::format!("{}x{}", gt.width, gt.height),
            actual: alloc::format!("{}x{}", pred.width, pred.height),
        });
    }
    let mut c = PixelCounts::default();
    for (&p, &g) in pred.data.iter().zip(&gt.data) {
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

pub fn pixel_metrics(pred: &Mask, gt: &Mask) -> Result<ClassScores> {
    Ok(pixel_counts(pred, gt)?.scores())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceCounts {
    pub tp: u64,
    pub predictions: u64,
    pub ground_truths: u64,
}

impl InstanceCounts {
    pub fn scores(&self) -> ClassScores {
        ClassScores::new(ratio(self.tp, self.predictions), ratio(self.tp, self.ground_truths))
    }
}

impl core::ops::AddAssign for InstanceCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.predictions += o.predictions;
        self.ground_truths += o.ground_truths;
    }
}

/// Greedy one-to-one matching for one class.
///
/// Predictions of `class` are visited by descending score; equal scores are
/// ordered by their best IoU against any ground truth of the class, then by
/// input position. Each prediction takes the unmatched ground truth of the
/// same class with the highest IoU, provided it reaches `iou_threshold`.
pub fn instance_counts(preds: &[Prediction], gts: &[TextInstance], iou_threshold: f64, class: Label) -> InstanceCounts {
    let gt_boxes: Vec<BBox> = gts.iter().filter(|g| g.label == class).map(TextInstance::bbox).collect();
    let mut order: Vec<(usize, &Prediction, f64)> = preds
        .iter()
        .enumerate()
        .filter(|(_, p)| p.class == class)
        .map(|(i, p)| {
            let best = gt_boxes.iter().map(|g| p.bbox.iou(g)).fold(0.0, f64::max);
            (i, p, best)
        })
        .collect();
    order.sort_by(|a, b| {
        b.1.score
            .total_cmp(&a.1.score)
            .then(b.2.total_cmp(&a.2))
            .then(a.0.cmp(&b.0))
    });

    let mut matched = vec![false; gt_boxes.len()];
    let mut tp = 0;
    for (_, p, _) in &order {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt_boxes.iter().enumerate() {
            if matched[j] {
                continue;
            }
            let iou = p.bbox.iou(g);
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        if let Some((j, _)) = best {
            matched[j] = true;
            tp += 1;
        }
    }
    InstanceCounts {
        tp,
        predictions: order.len() as u64,
        ground_truths: gt_boxes.len() as u64,
    }
}

pub fn instance_metrics(preds: &[Prediction], gts: &[TextInstance], iou_threshold: f64, class: Label) -> ClassScores {
    instance_counts(preds, gts, iou_threshold, class).scores()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Instance,
    Pixel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub mode: EvalMode,
    pub iou_threshold: f64,
    pub score_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: EvalMode::Instance,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            score_threshold: DEFAULT_SCORE_THRESHOLD,
        }
    }
}

/// Running totals over a test set; scores are computed from the summed
/// counts, not averaged per image.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub pixel: PerClass<PixelCounts>,
    pub instance: PerClass<InstanceCounts>,
}

impl Accumulator {
    /// Adds one image. `preds` may be empty when the detector produced
    /// nothing for it.
    pub fn add(&mut self, record: &Record, preds: &[Prediction], cfg: &EvalConfig) -> Result<()> {
        match cfg.mode {
            EvalMode::Pixel => {
                let pm = rasterize_boxes(preds, record.width, record.height, cfg.score_threshold);
                let gm = rasterize_instances(&record.instances, record.width, record.height);
                for label in Label::ALL {
                    *self.pixel.get_mut(label) += pixel_counts(pm.get(label), gm.get(label))?;
                }
            }
            EvalMode::Instance => {
                let kept: Vec<Prediction> = preds.iter().filter(|p| p.score >= cfg.score_threshold).copied().collect();
                for label in Label::ALL {
                    *self.instance.get_mut(label) += instance_counts(&kept, &record.instances, cfg.iou_threshold, label);
                }
            }
        }
        Ok(())
    }

    pub fn scores(&self, mode: EvalMode) -> PerClass<ClassScores> {
        match mode {
            EvalMode::Pixel => self.pixel.map(PixelCounts::scores),
            EvalMode::Instance => self.instance.map(InstanceCounts::scores),
        }
    }
}

/// Scores a whole test set. Predictions are matched to records by image
/// path; records without predictions count as empty detections.
pub fn evaluate(records: &[Record], preds: &[ImagePredictions], cfg: &EvalConfig) -> Result<PerClass<ClassScores>> {
    let by_image: BTreeMap<&str, &[Prediction]> = preds.iter().map(|p| (p.image.as_str(), p.predictions.as_slice())).collect();
    let mut acc = Accumulator::default();
    for r in records {
        acc.add(r, by_image.get(r.image.as_str()).copied().unwrap_or(&[]), cfg)?;
    }
    Ok(acc.scores(cfg.mode))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanScores {
    #[serde(rename = "mP")]
    pub mp: f64,
    #[serde(rename = "mR")]
    pub mr: f64,
    #[serde(rename = "mF")]
    pub mf: f64,
}

/// The 9×9 cross-session grid: rows are training sessions, columns test
/// sessions, both in canonical table order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMatrix {
    pub sessions: Vec<String>,
    pub cells: Vec<Vec<PerClass<ClassScores>>>,
    pub per_class: PerClass<MeanScores>,
    pub overall: MeanScores,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-class mP/mR/mF are arithmetic means over the 81 cells; the overall
/// figures are the mean of the two per-class values.
pub fn aggregate_matrix(cells: &BTreeMap<(TamperingMethod, TamperingMethod), PerClass<ClassScores>>) -> Result<EvalMatrix> {
    let mut missing = Vec::new();
    let mut grid = Vec::with_capacity(9);
    for train in TamperingMethod::ALL {
        let mut row = Vec::with_capacity(9);
        for test in TamperingMethod::ALL {
            match cells.get(&(train, test)) {
                Some(c) => row.push(*c),
                None => missing.push((train.name().to_string(), test.name().to_string())),
            }
        }
        grid.push(row);
    }
    if !missing.is_empty() {
        return Err(Error::IncompleteMatrix { missing });
    }
    let class_mean = |label: Label| {
        let all = || grid.iter().flatten().map(move |c| *c.get(label));
        MeanScores {
            mp: mean(all().map(|s| s.precision)),
            mr: mean(all().map(|s| s.recall)),
            mf: mean(all().map(|s| s.f1)),
        }
    };
    let per_class = PerClass {
        authentic: class_mean(Label::Authentic),
        tampered: class_mean(Label::Tampered),
    };
    let overall = overall_means(&per_class);
    Ok(EvalMatrix {
        sessions: TamperingMethod::ALL.iter().map(|m| m.name().to_string()).collect(),
        cells: grid,
        per_class,
        overall,
    })
}

/// Mean of the real-text and tampered-text figures.
pub fn overall_means(per_class: &PerClass<MeanScores>) -> MeanScores {
    let (a, t) = (per_class.authentic, per_class.tampered);
    MeanScores {
        mp: (a.mp + t.mp) / 2.0,
        mr: (a.mr + t.mr) / 2.0,
        mf: (a.mf + t.mf) / 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distortion {
    #[serde(rename = "jpeg75")]
    Jpeg75,
    #[serde(rename = "resize0.5")]
    ResizeHalf,
}

impl Distortion {
    pub fn output_size(self, width: u32, height: u32) -> (u32, u32) {
        match self {
            Distortion::Jpeg75 => (width, height),
            Distortion::ResizeHalf => (width.div_ceil(2), height.div_ceil(2)),
        }
    }
}

pub fn distort(img: &Image, kind: Distortion) -> Result<Image> {
    match kind {
        Distortion::Jpeg75 => jpeg_roundtrip(img, 75),
        Distortion::ResizeHalf => {
            let (w, h) = kind.output_size(img.width(), img.height());
            resize_bilinear(img, w, h)
        }
    }
}

/// Ground truth for a distorted image: dimensions updated, geometry scaled by
/// the per-axis resize factors.
pub fn distort_record(record: &Record, kind: Distortion) -> Result<Record> {
    if record.width == 0 || record.height == 0 {
        return Err(param("record", "image dimensions must be positive"));
    }
    let (w, h) = kind.output_size(record.width, record.height);
    let sx = f64::from(w) / f64::from(record.width);
    let sy = f64::from(h) / f64::from(record.height);
    let instances = record
        .instances
        .iter()
        .map(|i| TextInstance {
            geometry: i.geometry.scale(sx, sy),
            ..i.clone()
        })
        .collect();
    Ok(Record {
        image: record.image.clone(),
        width: w,
        height: h,
        instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Geometry;

    fn pred(x: f64, y: f64, w: f64, h: f64, class: Label, score: f64) -> Prediction {
        Prediction {
            bbox: BBox::new(x, y, w, h),
            class,
            score,
        }
    }

    fn gt(x: f64, y: f64, w: f64, h: f64, label: Label) -> TextInstance {
        TextInstance {
            geometry: Geometry::Box(BBox::new(x, y, w, h)),
            label,
            transcription: None,
        }
    }

    #[test]
    fn rasterize_examples() {
        let m = rasterize_boxes(&[], 20, 20, 0.5);
        assert_eq!(m.authentic.count() + m.tampered.count(), 0);

        let m = rasterize_boxes(&[pred(0.0, 0.0, 10.0, 10.0, Label::Tampered, 0.9)], 20, 20, 0.5);
        assert_eq!(m.tampered.count(), 100);
        assert_eq!(m.authentic.count(), 0);

        let m = rasterize_boxes(
            &[pred(0.0, 0.0, 10.0, 10.0, Label::Authentic, 0.9), pred(5.0, 0.0, 10.0, 10.0, Label::Authentic, 0.9)],
            20,
            20,
            0.5,
        );
        assert_eq!(m.authentic.count(), 150);

        let m = rasterize_boxes(&[pred(0.0, 0.0, 10.0, 10.0, Label::Tampered, 0.4)], 20, 20, 0.5);
        assert_eq!(m.tampered.count(), 0);
    }

    #[test]
    fn pixel_worked_example() {
        let mut g = Mask::zeros(10, 10);
        let mut p = Mask::zeros(10, 10);
        g.fill_box(&BBox::new(0.0, 0.0, 5.0, 10.0));
        p.fill_box(&BBox::new(0.0, 0.0, 10.0, 5.0));
        let s = pixel_metrics(&p, &g).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (50.0, 50.0, 50.0));
        assert!((s.iou.unwrap() - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn pixel_conventions() {
        let mut g = Mask::zeros(4, 4);
        g.fill_box(&BBox::new(0.0, 0.0, 2.0, 2.0));
        let s = pixel_metrics(&g, &g).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.iou), (100.0, 100.0, 100.0, Some(100.0)));
        let s = pixel_metrics(&Mask::zeros(4, 4), &g).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.iou), (0.0, 0.0, 0.0, Some(0.0)));
        let s = pixel_metrics(&Mask::zeros(4, 4), &Mask::zeros(4, 4)).unwrap();
        assert_eq!(s.iou, Some(100.0));
        assert!(pixel_metrics(&Mask::zeros(4, 3), &g).is_err());
    }

    #[test]
    fn instance_examples() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, Label::Tampered)];
        // IoU 0.6: 10×6 prediction inside a 10×10 box.
        let s = instance_metrics(&[pred(0.0, 0.0, 10.0, 6.0, Label::Tampered, 0.9)], &gts, 0.5, Label::Tampered);
        assert_eq!((s.precision, s.recall, s.f1), (100.0, 100.0, 100.0));
        let s = instance_metrics(&[pred(0.0, 0.0, 10.0, 4.0, Label::Tampered, 0.9)], &gts, 0.5, Label::Tampered);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        let s = instance_metrics(
            &[pred(0.0, 0.0, 10.0, 9.0, Label::Tampered, 0.8), pred(0.0, 0.0, 10.0, 8.0, Label::Tampered, 0.9)],
            &gts,
            0.5,
            Label::Tampered,
        );
        assert_eq!((s.precision, s.recall), (50.0, 100.0));
        assert!((s.f1 - 66.67).abs() < 0.005);
    }

    #[test]
    fn instance_class_filtering() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, Label::Tampered), gt(20.0, 0.0, 10.0, 10.0, Label::Authentic)];
        let preds = [pred(0.0, 0.0, 10.0, 10.0, Label::Authentic, 0.9)];
        let c = instance_counts(&preds, &gts, 0.5, Label::Authentic);
        assert_eq!(c, InstanceCounts { tp: 0, predictions: 1, ground_truths: 1 });
        let c = instance_counts(&preds, &gts, 0.5, Label::Tampered);
        assert_eq!(c, InstanceCounts { tp: 0, predictions: 0, ground_truths: 1 });
        assert_eq!(c.scores().f1, 0.0);
    }

    #[test]
    fn equal_scores_prefer_higher_iou() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0, Label::Tampered), gt(10.5, 0.0, 10.0, 10.0, Label::Tampered)];
        // Both overlap gt0; the tighter one is processed first and takes it.
        let a = pred(0.0, 0.0, 10.0, 7.0, Label::Tampered, 0.7);
        let b = pred(0.0, 0.0, 10.0, 9.0, Label::Tampered, 0.7);
        let fwd = instance_counts(&[a, b], &gts, 0.5, Label::Tampered);
        let rev = instance_counts(&[b, a], &gts, 0.5, Label::Tampered);
        assert_eq!(fwd, rev);
        assert_eq!(fwd.tp, 1);
    }

    fn table_fixture(real_mf: f64, tamp_mf: f64) -> BTreeMap<(TamperingMethod, TamperingMethod), PerClass<ClassScores>> {
        let mut cells = BTreeMap::new();
        for (i, tr) in TamperingMethod::ALL.into_iter().enumerate() {
            for (j, te) in TamperingMethod::ALL.into_iter().enumerate() {
                // Spread values around the target mean; the offsets cancel.
                let d = (i as f64 - 4.0) * 1.5 + (j as f64 - 4.0) * 0.5;
                let cell = |mf: f64| ClassScores {
                    precision: mf + 1.0,
                    recall: mf - 1.0,
                    f1: mf + d,
                    iou: None,
                };
                cells.insert((tr, te), PerClass { authentic: cell(real_mf), tampered: cell(tamp_mf) });
            }
        }
        cells
    }

    #[test]
    fn aggregate_reproduces_table_rows() {
        let m = aggregate_matrix(&table_fixture(76.74, 74.96)).unwrap();
        assert!((m.overall.mf - 75.85).abs() < 0.005);
        let m = aggregate_matrix(&table_fixture(75.98, 73.66)).unwrap();
        assert!((m.overall.mf - 74.82).abs() < 0.005);
    }

    #[test]
    fn aggregate_missing_cell() {
        let mut cells = table_fixture(50.0, 50.0);
        cells.remove(&(TamperingMethod::Mostel, TamperingMethod::AnyText));
        match aggregate_matrix(&cells) {
            Err(Error::IncompleteMatrix { missing }) => {
                assert_eq!(missing, [("MOSTEL".to_string(), "AnyText".to_string())]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn distort_examples() {
        let img = Image::filled(100, 60, [90, 90, 90]);
        let half = distort(&img, Distortion::ResizeHalf).unwrap();
        assert_eq!(half.dimensions(), (50, 30));
        let rec = Record {
            image: "x".into(),
            width: 100,
            height: 60,
            instances: vec![gt(10.0, 10.0, 20.0, 20.0, Label::Tampered)],
        };
        let scaled = distort_record(&rec, Distortion::ResizeHalf).unwrap();
        assert_eq!(scaled.instances[0].bbox(), BBox::new(5.0, 5.0, 10.0, 10.0));
        assert_eq!((scaled.width, scaled.height), (50, 30));

        let small = Image::filled(8, 8, [1; 3]);
        let twice = distort(&distort(&small, Distortion::ResizeHalf).unwrap(), Distortion::ResizeHalf).unwrap();
        assert_eq!(twice.dimensions(), (2, 2));

        let j = distort(&img, Distortion::Jpeg75).unwrap();
        assert!(crate::imaging::mad(&img, &j).unwrap() <= 1.0);
    }
}
