//! Difference-aware forensics head at desk scale.
//!
//! Per RoI vector `v` with the global feature `g` of its image:
//!
//! ```text
//! V_m   = W · [g; v] + b          (modulated authentic kernel)
//! logit = w · (v - V_m) + c
//! p     = logistic(logit)
//! ```
//!
//! Training minimizes `L_all = L_cls + L_bbox + L_feat` where `L_cls` is the
//! negated binary cross-entropy, `L_bbox` the mean L1 box error and
//! `L_feat = Dist_auth + max(Dist_auth - Dist_tamp + margin, 0)`, the two
//! distances being mean L2 distances of authentic / tampered RoI vectors to
//! the authentic kernel `K`.
//!
//! Gradients are analytic; [`grad_check`] compares them with central finite
//! differences.

#![allow(clippy::needless_range_loop)]

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{param, Error, Result};

pub const DEFAULT_MARGIN: f64 = 32.0;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the
/// cross-entropy.
pub const PROB_CLAMP: f64 = 1e-7;

/// Pass threshold for [`grad_check`].
pub const GRAD_CHECK_TOLERANCE: f64 = 1e-5;

/// Smallest gradient magnitude used as the relative-error denominator, so
/// that exactly-zero gradients compare on an absolute scale.
pub const GRAD_CHECK_FLOOR: f64 = 1e-3;

/// Distance to a non-differentiable point below which [`grad_check`] refuses
/// to run.
pub const KINK_TOLERANCE: f64 = 1e-4;

/// RoI vectors of one image (or batch) with their shared global vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBatch {
    pub dim: usize,
    /// `n × dim`, row-major.
    pub roi: Vec<f64>,
    pub global: Vec<f64>,
    /// `true` = tampered.
    pub labels: Vec<bool>,
}

impl FeatureBatch {
    pub fn new(dim: usize, roi: Vec<f64>, global: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        let b = Self {
            dim,
            roi,
            global,
            labels,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.roi[i * self.dim..(i + 1) * self.dim]
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.labels.is_empty() {
            return Err(param("batch", "need at least one instance and dim >= 1"));
        }
        if self.roi.len() != self.labels.len() * self.dim || self.global.len() != self.dim {
            return Err(Error::Dimension {
                expected: alloc::format!("{}x{} roi and {} global", self.labels.len(), self.dim, self.dim),
                actual: alloc::format!("{} roi and {} global", self.roi.len(), self.global.len()),
            });
        }
        if !self.roi.iter().chain(&self.global).all(|v| v.is_finite()) {
            return Err(param("batch", "features must be finite"));
        }
        Ok(())
    }

    /// Same batch with every row repeated once.
    pub fn doubled(&self) -> FeatureBatch {
        let mut roi = Vec::with_capacity(self.roi.len() * 2);
        let mut labels = Vec::with_capacity(self.labels.len() * 2);
        for i in 0..self.len() {
            roi.extend_from_slice(self.row(i));
            roi.extend_from_slice(self.row(i));
            labels.extend([self.labels[i]; 2]);
        }
        FeatureBatch {
            dim: self.dim,
            roi,
            global: self.global.clone(),
            labels,
        }
    }
}

/// Which vector the distance losses compare RoI features against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceTarget {
    /// The raw authentic kernel `K`.
    #[default]
    Kernel,
    /// The per-instance modulated kernel `V_m`.
    Modulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DafParams {
    pub kernel: Vec<f64>,
    /// `dim × 2·dim`, row-major; the first `dim` columns act on the global
    /// vector, the rest on the RoI vector.
    pub mod_weight: Vec<f64>,
    pub mod_bias: Vec<f64>,
    pub cls_weight: Vec<f64>,
    pub cls_bias: f64,
    pub margin: f64,
    #[serde(default)]
    pub distance: DistanceTarget,
}

impl DafParams {
    pub fn zeros(dim: usize) -> Self {
        Self {
            kernel: vec![0.0; dim],
            mod_weight: vec![0.0; 2 * dim * dim],
            mod_bias: vec![0.0; dim],
            cls_weight: vec![0.0; dim],
            cls_bias: 0.0,
            margin: DEFAULT_MARGIN,
            distance: DistanceTarget::Kernel,
        }
    }

    /// Gaussian initialization with the given standard deviations; biases
    /// start at zero.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R, kernel_std: f64, weight_std: f64) -> Self {
        let mut draw = |n: usize, std: f64| -> Vec<f64> {
            (0..n).map(|_| { let z: f64 = StandardNormal.sample(rng); std * z }).collect::<Vec<f64>>()
        };
        let kernel = draw(dim, kernel_std);
        let mod_weight = draw(2 * dim * dim, weight_std);
        let cls_weight = draw(dim, weight_std);
        Self {
            kernel,
            mod_weight,
            mod_bias: vec![0.0; dim],
            cls_weight,
            cls_bias: 0.0,
            margin: DEFAULT_MARGIN,
            distance: DistanceTarget::Kernel,
        }
    }

    pub fn dim(&self) -> usize {
        self.kernel.len()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.kernel.len() != dim
            || self.mod_weight.len() != 2 * dim * dim
            || self.mod_bias.len() != dim
            || self.cls_weight.len() != dim
        {
            return Err(Error::Dimension {
                expected: alloc::format!("parameters for dim {dim}"),
                actual: alloc::format!("kernel of length {}", self.kernel.len()),
            });
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(param("margin", "must be finite and > 0"));
        }
        if !self.flat().iter().all(|v| v.is_finite()) {
            return Err(param("params", "must be finite"));
        }
        Ok(())
    }

    /// All trainable values in a fixed order: kernel, modulation weight,
    /// modulation bias, classifier weight, classifier bias.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.kernel.len() * (2 * self.kernel.len() + 3) + 1);
        v.extend_from_slice(&self.kernel);
        v.extend_from_slice(&self.mod_weight);
        v.extend_from_slice(&self.mod_bias);
        v.extend_from_slice(&self.cls_weight);
        v.push(self.cls_bias);
        v
    }

    fn flat_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.kernel
            .iter_mut()
            .chain(self.mod_weight.iter_mut())
            .chain(self.mod_bias.iter_mut())
            .chain(self.cls_weight.iter_mut())
            .chain(core::iter::once(&mut self.cls_bias))
    }

    fn set_flat(&mut self, index: usize, value: f64) {
        if let Some(slot) = self.flat_mut().nth(index) {
            *slot = value;
        }
    }

    /// `self -= lr · grad`.
    pub fn step(&mut self, grad: &DafParams, lr: f64) {
        for (p, g) in self.flat_mut().zip(grad.flat()) {
            *p -= lr * g;
        }
    }

    fn flat_name(&self, index: usize) -> String {
        let d = self.dim();
        let mut i = index;
        if i < d {
            return alloc::format!("kernel[{i}]");
        }
        i -= d;
        if i < 2 * d * d {
            return alloc::format!("mod_weight[{}][{}]", i / (2 * d), i % (2 * d));
        }
        i -= 2 * d * d;
        if i < d {
            return alloc::format!("mod_bias[{i}]");
        }
        i -= d;
        if i < d {
            return alloc::format!("cls_weight[{i}]");
        }
        String::from("cls_bias")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_cls: f64,
    pub l_bbox: f64,
    pub l_feat: f64,
    pub l_all: f64,
    pub dist_auth: f64,
    pub dist_tamp: f64,
    /// Set when the batch lacks one label group; that group's mean distance
    /// was taken as 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_group: Option<Label>,
}

/// Intermediate values of one forward pass.
struct Forward {
    /// `W_g·g + b`, shared by every row.
    shared: Vec<f64>,
    probs: Vec<f64>,
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

fn run_forward(batch: &FeatureBatch, p: &DafParams) -> Forward {
    let d = batch.dim;
    let shared: Vec<f64> = (0..d)
        .map(|r| dot(&p.mod_weight[r * 2 * d..r * 2 * d + d], &batch.global) + p.mod_bias[r])
        .collect();
    let mut eff = p.cls_weight.clone();
    for r in 0..d {
        let w = p.cls_weight[r];
        let row = &p.mod_weight[r * 2 * d + d..(r + 1) * 2 * d];
        for (e, &m) in eff.iter_mut().zip(row) {
            *e -= w * m;
        }
    }
    let offset = p.cls_bias - dot(&p.cls_weight, &shared);
    // logit_i = (w - W_vᵀw)·v_i - w·shared + c
    let probs = (0..batch.len())
        .map(|i| logistic(dot(&eff, batch.row(i)) + offset))
        .collect();
    Forward {
        shared,
        probs,
    }
}

/// Modulated kernel `V_m` for row `i`.
fn modulated(batch: &FeatureBatch, p: &DafParams, shared: &[f64], i: usize) -> Vec<f64> {
    let d = batch.dim;
    let v = batch.row(i);
    (0..d)
        .map(|r| shared[r] + dot(&p.mod_weight[r * 2 * d + d..(r + 1) * 2 * d], v))
        .collect()
}

/// Tampering probability for every RoI vector.
pub fn forward(batch: &FeatureBatch, params: &DafParams) -> Result<Vec<f64>> {
    batch.validate()?;
    params.validate(batch.dim)?;
    Ok(run_forward(batch, params).probs)
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Mean negated binary cross-entropy.
pub fn loss_cls(probs: &[f64], labels: &[bool]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = clamp_prob(p);
            if y {
                -libm::log(p)
            } else {
                -libm::log(1.0 - p)
            }
        })
        .sum();
    total / probs.len() as f64
}

/// Mean element-wise absolute difference between matched `N × 4` boxes.
pub fn loss_bbox(pred: &[[f64; 4]], target: &[[f64; 4]]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Dimension {
            expected: alloc::format!("{} boxes", target.len()),
            actual: alloc::format!("{} boxes", pred.len()),
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pred
        .iter()
        .zip(target)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .sum();
    Ok(total / (4 * pred.len()) as f64)
}

/// Per-row distance to the loss target (K or V_m).
fn distances(batch: &FeatureBatch, p: &DafParams, fwd: &Forward) -> Vec<f64> {
    (0..batch.len())
        .map(|i| {
            let v = batch.row(i);
            match p.distance {
                DistanceTarget::Kernel => {
                    libm::sqrt(v.iter().zip(&p.kernel).map(|(a, k)| (a - k) * (a - k)).sum())
                }
                DistanceTarget::Modulated => {
                    let m = modulated(batch, p, &fwd.shared, i);
                    libm::sqrt(v.iter().zip(&m).map(|(a, k)| (a - k) * (a - k)).sum())
                }
            }
        })
        .collect()
}

struct FeatTerms {
    l_feat: f64,
    dist_auth: f64,
    dist_tamp: f64,
    hinge: f64,
    n_auth: usize,
    n_tamp: usize,
    missing: Option<Label>,
}

fn feat_terms(labels: &[bool], dist: &[f64], margin: f64) -> FeatTerms {
    let (mut sa, mut na, mut st, mut nt) = (0.0, 0usize, 0.0, 0usize);
    for (&y, &d) in labels.iter().zip(dist) {
        if y {
            st += d;
            nt += 1;
        } else {
            sa += d;
            na += 1;
        }
    }
    let dist_auth = if na > 0 { sa / na as f64 } else { 0.0 };
    let dist_tamp = if nt > 0 { st / nt as f64 } else { 0.0 };
    let hinge = dist_auth - dist_tamp + margin;
    let missing = if na == 0 {
        Some(Label::Authentic)
    } else if nt == 0 {
        Some(Label::Tampered)
    } else {
        None
    };
    FeatTerms {
        l_feat: dist_auth + hinge.max(0.0),
        dist_auth,
        dist_tamp,
        hinge,
        n_auth: na,
        n_tamp: nt,
        missing,
    }
}

/// `(l_feat, dist_auth, dist_tamp)`. A batch without authentic (or without
/// tampered) instances uses 0 for that mean distance; check
/// [`LossBreakdown::missing_group`] via [`total_loss`] to detect it.
pub fn loss_feat(batch: &FeatureBatch, params: &DafParams) -> Result<(f64, f64, f64)> {
    batch.validate()?;
    params.validate(batch.dim)?;
    let fwd = run_forward(batch, params);
    let t = feat_terms(&batch.labels, &distances(batch, params, &fwd), params.margin);
    Ok((t.l_feat, t.dist_auth, t.dist_tamp))
}

fn breakdown(batch: &FeatureBatch, params: &DafParams, fwd: &Forward, l_bbox: f64) -> (LossBreakdown, FeatTerms, Vec<f64>) {
    let dist = distances(batch, params, fwd);
    let t = feat_terms(&batch.labels, &dist, params.margin);
    let l_cls = loss_cls(&fwd.probs, &batch.labels);
    let b = LossBreakdown {
        l_cls,
        l_bbox,
        l_feat: t.l_feat,
        l_all: l_cls + l_bbox + t.l_feat,
        dist_auth: t.dist_auth,
        dist_tamp: t.dist_tamp,
        missing_group: t.missing,
    };
    (b, t, dist)
}

/// `L_all = L_cls + L_bbox + L_feat` with unit weights.
pub fn total_loss(
    batch: &FeatureBatch,
    params: &DafParams,
    pred_boxes: &[[f64; 4]],
    target_boxes: &[[f64; 4]],
) -> Result<LossBreakdown> {
    batch.validate()?;
    params.validate(batch.dim)?;
    let l_bbox = loss_bbox(pred_boxes, target_boxes)?;
    let fwd = run_forward(batch, params);
    Ok(breakdown(batch, params, &fwd, l_bbox).0)
}

/// Analytic gradient of `L_all` with respect to every parameter. Box
/// predictions are inputs here, so `L_bbox` contributes nothing. At the
/// hinge kink the inactive branch is taken; at a zero distance the
/// subgradient 0 is used.
pub fn gradient(batch: &FeatureBatch, params: &DafParams) -> Result<(LossBreakdown, DafParams)> {
    batch.validate()?;
    params.validate(batch.dim)?;
    let d = batch.dim;
    let n = batch.len();
    let fwd = run_forward(batch, params);
    let (loss, terms, dist) = breakdown(batch, params, &fwd, 0.0);

    let mut g = DafParams::zeros(d);
    g.margin = params.margin;
    g.distance = params.distance;

    // Classification: dL/dlogit_i = (p_i - y_i)/N unless the clamp is active.
    let mut s_sum = 0.0;
    let mut s_v = vec![0.0; d];
    for i in 0..n {
        let p = fwd.probs[i];
        if p <= PROB_CLAMP || p >= 1.0 - PROB_CLAMP {
            continue;
        }
        let y = if batch.labels[i] { 1.0 } else { 0.0 };
        let s = (p - y) / n as f64;
        s_sum += s;
        for (acc, &v) in s_v.iter_mut().zip(batch.row(i)) {
            *acc += s * v;
        }
    }
    g.cls_bias = s_sum;
    // dw = Σ s_i (v_i - V_m,i) = S_v - S·shared - W_v·S_v
    for r in 0..d {
        let row = &params.mod_weight[r * 2 * d + d..(r + 1) * 2 * d];
        g.cls_weight[r] = s_v[r] - s_sum * fwd.shared[r] - dot(row, &s_v);
    }
    // dV_m,i = -s_i·w, so dW[r] = -w_r·[S·g; S_v] and db = -S·w.
    for r in 0..d {
        let w = params.cls_weight[r];
        g.mod_bias[r] = -s_sum * w;
        for k in 0..d {
            g.mod_weight[r * 2 * d + k] = -w * s_sum * batch.global[k];
            g.mod_weight[r * 2 * d + d + k] = -w * s_v[k];
        }
    }

    // Feature loss: L = Da + max(Da - Dt + margin, 0).
    let active = if terms.hinge > 0.0 { 1.0 } else { 0.0 };
    let coef_auth = if terms.n_auth > 0 { (1.0 + active) / terms.n_auth as f64 } else { 0.0 };
    let coef_tamp = if terms.n_tamp > 0 { -active / terms.n_tamp as f64 } else { 0.0 };
    for i in 0..n {
        let coef = if batch.labels[i] { coef_tamp } else { coef_auth };
        if coef == 0.0 || dist[i] == 0.0 {
            continue;
        }
        let v = batch.row(i);
        match params.distance {
            DistanceTarget::Kernel => {
                // d‖v - K‖/dK = (K - v)/‖v - K‖
                for k in 0..d {
                    g.kernel[k] += coef * (params.kernel[k] - v[k]) / dist[i];
                }
            }
            DistanceTarget::Modulated => {
                let m = modulated(batch, params, &fwd.shared, i);
                for r in 0..d {
                    let dm = coef * (m[r] - v[r]) / dist[i];
                    g.mod_bias[r] += dm;
                    for k in 0..d {
                        g.mod_weight[r * 2 * d + k] += dm * batch.global[k];
                        g.mod_weight[r * 2 * d + d + k] += dm * v[k];
                    }
                }
            }
        }
    }
    Ok((loss, g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_parameter: String,
    pub analytic: f64,
    pub numeric: f64,
    pub parameters: usize,
    pub epsilon: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares [`gradient`] with central differences of [`total_loss`] for
/// every parameter. The relative error of one entry is
/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
///
/// Refuses ([`Error::OnKink`]) when the configuration is within
/// [`KINK_TOLERANCE`] of a non-differentiable point: a zero distance, the
/// hinge boundary or the probability clamp.
pub fn grad_check(params: &DafParams, batch: &FeatureBatch, epsilon: f64) -> Result<GradCheckReport> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(param("epsilon", "must be finite and > 0"));
    }
    let (_, analytic) = gradient(batch, params)?;
    let fwd = run_forward(batch, params);
    let dist = distances(batch, params, &fwd);
    if dist.iter().any(|&x| x < KINK_TOLERANCE) {
        return Err(Error::OnKink { what: "zero distance" });
    }
    let terms = feat_terms(&batch.labels, &dist, params.margin);
    if terms.hinge.abs() < KINK_TOLERANCE {
        return Err(Error::OnKink { what: "hinge boundary" });
    }
    if fwd
        .probs
        .iter()
        .any(|&p| !(PROB_CLAMP * 10.0..=1.0 - PROB_CLAMP * 10.0).contains(&p))
    {
        return Err(Error::OnKink { what: "probability clamp" });
    }

    let loss_at = |p: &DafParams| -> f64 {
        let fwd = run_forward(batch, p);
        breakdown(batch, p, &fwd, 0.0).0.l_all
    };
    let base = params.flat();
    let grads = analytic.flat();
    let mut probe = params.clone();
    let mut worst = (0.0, 0usize, 0.0, 0.0);
    for (i, (&x, &a)) in base.iter().zip(&grads).enumerate() {
        probe.set_flat(i, x + epsilon);
        let up = loss_at(&probe);
        probe.set_flat(i, x - epsilon);
        let down = loss_at(&probe);
        probe.set_flat(i, x);
        let numeric = (up - down) / (2.0 * epsilon);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        if rel > worst.0 || i == 0 {
            worst = (rel, i, a, numeric);
        }
    }
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        worst_parameter: params.flat_name(worst.1),
        analytic: worst.2,
        numeric: worst.3,
        parameters: base.len(),
        epsilon,
        tolerance: GRAD_CHECK_TOLERANCE,
        passed: worst.0 < GRAD_CHECK_TOLERANCE,
    })
}

/// Gradient check on a random smooth configuration: `n / 2` authentic rows
/// from N(0, I), the rest around a centre at distance 3, weights drawn with
/// standard deviation 0.3. Configurations that land on a kink are redrawn
/// (up to 16 times).
pub fn random_grad_check(dim: usize, n: usize, seed: u64, epsilon: f64) -> Result<GradCheckReport> {
    if dim == 0 || n < 2 {
        return Err(param("grad check", "need dim >= 1 and n >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = Error::OnKink { what: "no draw" };
    for _ in 0..16 {
        let center = random_center(&mut rng, dim, 3.0);
        let batch = synthetic_batch(&mut rng, dim, n / 2, n - n / 2, &center);
        let params = DafParams::random(dim, &mut rng, 1.0, 0.3);
        match grad_check(&params, &batch, epsilon) {
            Err(e @ Error::OnKink { .. }) => last = e,
            other => return other,
        }
    }
    Err(last)
}

/// Synthetic batch: `n_auth` rows from N(0, I) and `n_tamp` rows from
/// N(center, I); the global vector is the batch mean.
pub fn synthetic_batch<R: Rng + ?Sized>(rng: &mut R, dim: usize, n_auth: usize, n_tamp: usize, center: &[f64]) -> FeatureBatch {
    let n = n_auth + n_tamp;
    let mut roi = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let tampered = i >= n_auth;
        for c in center.iter().take(dim) {
            let z: f64 = StandardNormal.sample(rng);
            roi.push(if tampered { c + z } else { z });
        }
        labels.push(tampered);
    }
    let mut global = vec![0.0; dim];
    for i in 0..n {
        for (g, v) in global.iter_mut().zip(&roi[i * dim..(i + 1) * dim]) {
            *g += v / n as f64;
        }
    }
    FeatureBatch {
        dim,
        roi,
        global,
        labels,
    }
}

/// Random direction scaled to `norm`.
pub fn random_center<R: Rng + ?Sized>(rng: &mut R, dim: usize, norm_len: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n * norm_len).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub dim: usize,
    /// Instances per class, for both the training and held-out sets.
    pub n_per_class: usize,
    pub separation: f64,
    pub margin: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Loss curve sampling period in steps.
    pub log_every: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            n_per_class: 1000,
            separation: 10.0,
            margin: DEFAULT_MARGIN,
            steps: 2000,
            learning_rate: 0.05,
            seed: 0,
            log_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub steps: usize,
    /// `‖K - mean of the authentic training vectors‖₂`.
    pub kernel_to_authentic_mean: f64,
    pub held_out_accuracy: f64,
    pub final_loss: LossBreakdown,
    /// Whether `Dist_auth - Dist_tamp + margin > 0` at the end.
    pub hinge_active: bool,
    /// `(step, loss)` every `log_every` steps plus the last step.
    pub loss_curve: Vec<(usize, LossBreakdown)>,
}

/// Full-batch gradient descent on `L_cls + L_feat` over two Gaussian
/// clusters (`L_bbox` is 0: targets equal predictions). Deterministic for a
/// given config.
pub fn train_toy(config: &ToyConfig) -> Result<(DafParams, ToyReport)> {
    if config.dim == 0 || config.n_per_class == 0 {
        return Err(param("toy config", "dim and n_per_class must be >= 1"));
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return Err(param("learning_rate", "must be finite and > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let center = random_center(&mut rng, config.dim, config.separation);
    let train = synthetic_batch(&mut rng, config.dim, config.n_per_class, config.n_per_class, &center);
    let held_out = synthetic_batch(&mut rng, config.dim, config.n_per_class, config.n_per_class, &center);

    let mut params = DafParams::random(config.dim, &mut rng, 1.0, 0.01);
    params.margin = config.margin;

    let log_every = config.log_every.max(1);
    let mut curve = Vec::new();
    for step in 0..config.steps {
        let (loss, grad) = gradient(&train, &params)?;
        if !loss.l_all.is_finite() {
            return Err(Error::Diverged { step });
        }
        if step % log_every == 0 {
            curve.push((step, loss));
        }
        params.step(&grad, config.learning_rate);
        if !params.flat().iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { step });
        }
    }
    let fwd = run_forward(&train, &params);
    let (final_loss, terms, _) = breakdown(&train, &params, &fwd, 0.0);
    if !final_loss.l_all.is_finite() {
        return Err(Error::Diverged { step: config.steps });
    }
    curve.push((config.steps, final_loss));

    let mut auth_mean = vec![0.0; config.dim];
    for i in 0..train.len() {
        if !train.labels[i] {
            for (m, v) in auth_mean.iter_mut().zip(train.row(i)) {
                *m += v / config.n_per_class as f64;
            }
        }
    }
    let diff: Vec<f64> = params.kernel.iter().zip(&auth_mean).map(|(k, m)| k - m).collect();
    let probs = run_forward(&held_out, &params).probs;
    let correct = probs
        .iter()
        .zip(&held_out.labels)
        .filter(|(&p, &y)| (p >= 0.5) == y)
        .count();

    let report = ToyReport {
        steps: config.steps,
        kernel_to_authentic_mean: norm(&diff),
        held_out_accuracy: correct as f64 / held_out.len() as f64,
        final_loss,
        hinge_active: terms.hinge > 0.0,
        loss_curve: curve,
    };
    Ok((params, report))
}
