//! Segmentation loss functions on probability fields.
//!
//! The smooth IOU loss is `1 - |py| / (|p| + |y| - |py|)` with `|.|` the sum
//! of entries; it agrees with one minus the Jaccard index whenever `p` is
//! binary, and when restricted to binary fields it is a metric. The Dice
//! loss `1 - 2|py| / (|p| + |y|)` shares all its essential properties but
//! fails the triangle inequality. Both extend to an infinite family: any
//! per-index smooth increasing remapping of the probabilities with fixed
//! endpoints (for instance powers `p^m`, m > 0) yields a loss with the same
//! binary agreement, monotonicity, and extremes.
//!
//! The degenerate point `p = y = 0` leaves the enclosed fraction 0/0; we set
//! the fraction to 1, so the loss of two empty fields is 0 and "loss is zero
//! iff p = y" holds on all of the domain.
//!
//! Voxel reductions use a fixed pairwise tree determined by the data length,
//! so results never depend on thread count or batch partitioning.

mod verify;

pub use verify::{
    check_metric, grad_check, penalty_curves, restriction_bound, GradCheckReport,
    MetricCheckReport, PenaltyPoint, RestrictionCheck, TriangleCounterexample,
};

use crate::error::{Error, Result};
use crate::volgrid::{LabelMap, Mask, Volume, NUM_CLASSES};
use serde::Serialize;
use std::collections::BTreeMap;

/// Model output probabilities, one per voxel, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbField {
    p: Vec<f64>,
}

impl ProbField {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        for &v in &p {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidProbability(v));
            }
        }
        Ok(ProbField { p })
    }

    pub fn from_volume(volume: &Volume) -> Result<Self> {
        Self::new(volume.data().iter().map(|&v| f64::from(v)).collect())
    }

    pub fn from_mask(mask: &Mask) -> Self {
        ProbField {
            p: mask.data().iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }
}

/// Binary ground-truth labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryField {
    y: Vec<u8>,
}

impl BinaryField {
    pub fn new(y: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = y.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidVolume(format!(
                "binary field values must be 0 or 1, found {bad}"
            )));
        }
        Ok(BinaryField { y })
    }

    pub fn from_mask(mask: &Mask) -> Self {
        BinaryField {
            y: mask.data().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.y
    }

    /// `N = |y|`, the foreground voxel count.
    pub fn count_ones(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_prob(&self) -> ProbField {
        ProbField {
            p: self.y.iter().map(|&v| f64::from(v)).collect(),
        }
    }
}

/// A scalar loss with optional gradient and per-class breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct LossReport {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class: Option<BTreeMap<u8, f64>>,
}

impl LossReport {
    fn scalar(value: f64) -> Self {
        LossReport {
            value,
            gradient: None,
            per_class: None,
        }
    }
}

/// Loss selector used by the verification suites and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Iou,
    Dice,
    IouPower(f64),
}

impl LossKind {
    pub fn name(&self) -> String {
        match self {
            LossKind::Iou => "iou".into(),
            LossKind::Dice => "dice".into(),
            LossKind::IouPower(m) => format!("iou-pow({m})"),
        }
    }
}

/// Evaluate a [`LossKind`].
pub fn evaluate(kind: LossKind, p: &ProbField, y: &BinaryField) -> Result<LossReport> {
    match kind {
        LossKind::Iou => iou_loss(p, y),
        LossKind::Dice => dice_loss(p, y),
        LossKind::IouPower(m) => iou_loss_power(p, y, m),
    }
}

/// Fixed-shape pairwise reduction; the split tree depends only on length.
pub(crate) fn pairwise_sum<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
    if hi - lo <= 64 {
        let mut acc = 0.0;
        for k in lo..hi {
            acc += term(k);
        }
        acc
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise_sum(lo, mid, term) + pairwise_sum(mid, hi, term)
    }
}

fn check_lengths(p: &ProbField, y: &BinaryField) -> Result<()> {
    if p.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: y.len(),
        });
    }
    Ok(())
}

/// Smooth IOU (Jaccard) loss with analytic gradient.
///
/// With `I = sum(p*y)` and `U = sum(p) + sum(y) - I`, the loss is `1 - I/U`
/// and the gradient is `dL/dp_k = (I*(1-y_k) - U*y_k) / U^2`.
pub fn iou_loss(p: &ProbField, y: &BinaryField) -> Result<LossReport> {
    check_lengths(p, y)?;
    let n = p.len();
    let ps = p.values();
    let ys = y.values();
    let intersection = pairwise_sum(0, n, &|k| ps[k] * f64::from(ys[k]));
    let sum_p = pairwise_sum(0, n, &|k| ps[k]);
    let sum_y = y.count_ones() as f64;
    let union = sum_p + sum_y - intersection;

    if union == 0.0 {
        return Ok(LossReport {
            value: 0.0,
            gradient: Some(vec![0.0; n]),
            per_class: None,
        });
    }
    let value = 1.0 - intersection / union;
    let u2 = union * union;
    let gradient = ys
        .iter()
        .map(|&yk| {
            let yk = f64::from(yk);
            (intersection * (1.0 - yk) - union * yk) / u2
        })
        .collect();
    Ok(LossReport {
        value,
        gradient: Some(gradient),
        per_class: None,
    })
}

/// Dice loss `1 - 2I/S` with `S = sum(p) + sum(y)`; gradient
/// `dL/dp_k = 2*(I - y_k*S) / S^2`.
pub fn dice_loss(p: &ProbField, y: &BinaryField) -> Result<LossReport> {
    check_lengths(p, y)?;
    let n = p.len();
    let ps = p.values();
    let ys = y.values();
    let intersection = pairwise_sum(0, n, &|k| ps[k] * f64::from(ys[k]));
    let total = pairwise_sum(0, n, &|k| ps[k]) + y.count_ones() as f64;

    if total == 0.0 {
        return Ok(LossReport {
            value: 0.0,
            gradient: Some(vec![0.0; n]),
            per_class: None,
        });
    }
    let value = 1.0 - 2.0 * intersection / total;
    let s2 = total * total;
    let gradient = ys
        .iter()
        .map(|&yk| 2.0 * (intersection - f64::from(yk) * total) / s2)
        .collect();
    Ok(LossReport {
        value,
        gradient: Some(gradient),
        per_class: None,
    })
}

/// Power-family IOU loss: probabilities enter as `p_k^m` in the
/// intersection and the `sum(p)` term. Reduces to [`iou_loss`] at `m = 1`
/// and agrees with the binary IOU loss for binary `p` at any power.
pub fn iou_loss_power(p: &ProbField, y: &BinaryField, m: f64) -> Result<LossReport> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "power must be positive, got {m}"
        )));
    }
    check_lengths(p, y)?;
    let n = p.len();
    let ps = p.values();
    let ys = y.values();
    let intersection = pairwise_sum(0, n, &|k| ps[k].powf(m) * f64::from(ys[k]));
    let sum_pm = pairwise_sum(0, n, &|k| ps[k].powf(m));
    let sum_y = y.count_ones() as f64;
    let union = sum_pm + sum_y - intersection;

    if union == 0.0 {
        return Ok(LossReport {
            value: 0.0,
            gradient: Some(vec![0.0; n]),
            per_class: None,
        });
    }
    let value = 1.0 - intersection / union;
    let u2 = union * union;
    let gradient = ps
        .iter()
        .zip(ys)
        .map(|(&pk, &yk)| {
            let yk = f64::from(yk);
            m * pk.powf(m - 1.0) * (intersection * (1.0 - yk) - union * yk) / u2
        })
        .collect();
    Ok(LossReport {
        value,
        gradient: Some(gradient),
        per_class: None,
    })
}

/// General-family IOU loss: probabilities pass through per-index smooth
/// increasing maps with `f_k(0) = 0` and `f_k(1) = 1`. The endpoint
/// conditions are checked numerically (tolerance 1e-12); monotonicity and
/// smoothness are the caller's contract.
pub fn iou_loss_general<F>(p: &ProbField, y: &BinaryField, f: F) -> Result<LossReport>
where
    F: Fn(usize, f64) -> f64,
{
    check_lengths(p, y)?;
    let n = p.len();
    for k in 0..n {
        let at0 = f(k, 0.0);
        let at1 = f(k, 1.0);
        if at0.abs() > 1e-12 || (at1 - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "map {k} violates endpoint normalization: f(0)={at0}, f(1)={at1}"
            )));
        }
    }
    let ps = p.values();
    let ys = y.values();
    let intersection = pairwise_sum(0, n, &|k| f(k, ps[k]) * f64::from(ys[k]));
    let sum_f = pairwise_sum(0, n, &|k| f(k, ps[k]));
    let sum_y = y.count_ones() as f64;
    let union = sum_f + sum_y - intersection;
    let value = if union == 0.0 {
        0.0
    } else {
        1.0 - intersection / union
    };
    Ok(LossReport::scalar(value))
}

/// Weight assignment for [`weighted_cross_entropy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WceMode {
    /// Each class weighted by its own prevalence: a foreground voxel
    /// weighs `w` (the foreground fraction), a background voxel `1 - w`.
    /// Small classes get small weights, which is exactly the imbalance the
    /// IOU loss avoids.
    ClassFrequency,
    /// Swapped weights (foreground gets `1 - w`), the usual
    /// inverse-frequency balancing.
    InverseFrequency,
}

/// Weighted cross-entropy baseline. Probabilities are clipped to
/// `[1e-7, 1 - 1e-7]` before the log.
pub fn weighted_cross_entropy(p: &ProbField, y: &BinaryField, mode: WceMode) -> Result<LossReport> {
    check_lengths(p, y)?;
    let n = p.len();
    if n == 0 {
        return Ok(LossReport::scalar(0.0));
    }
    let w = y.count_ones() as f64 / n as f64;
    let ps = p.values();
    let ys = y.values();
    const CLIP: f64 = 1e-7;

    let weight = |yk: f64| match mode {
        WceMode::ClassFrequency => (1.0 - yk) * (1.0 - w) + yk * w,
        WceMode::InverseFrequency => (1.0 - yk) * w + yk * (1.0 - w),
    };
    let value = pairwise_sum(0, n, &|k| {
        let yk = f64::from(ys[k]);
        let pk = ps[k].clamp(CLIP, 1.0 - CLIP);
        let true_class_prob = yk * pk + (1.0 - yk) * (1.0 - pk);
        weight(yk) * -true_class_prob.ln()
    }) / n as f64;

    let gradient = ps
        .iter()
        .zip(ys)
        .map(|(&pk, &yk)| {
            let yk = f64::from(yk);
            let pk = pk.clamp(CLIP, 1.0 - CLIP);
            let true_class_prob = yk * pk + (1.0 - yk) * (1.0 - pk);
            weight(yk) * (1.0 - 2.0 * yk) / true_class_prob / n as f64
        })
        .collect();
    Ok(LossReport {
        value,
        gradient: Some(gradient),
        per_class: None,
    })
}

/// Multi-class loss: the unweighted mean of the per-class losses, one
/// probability field per class code. Per-voxel probabilities must sum to 1
/// within `1e-5`. Classes absent from both prediction support and truth
/// contribute 0 through the empty-empty convention.
pub fn multiclass_loss(
    class_probs: &[ProbField],
    labels: &LabelMap,
    base: LossKind,
) -> Result<LossReport> {
    if class_probs.len() != usize::from(NUM_CLASSES) {
        return Err(Error::InvalidParameter(format!(
            "expected {NUM_CLASSES} class probability fields, got {}",
            class_probs.len()
        )));
    }
    let n = labels.data().len();
    for field in class_probs {
        if field.len() != n {
            return Err(Error::LengthMismatch {
                left: field.len(),
                right: n,
            });
        }
    }
    const NORM_TOL: f64 = 1e-5;
    for voxel in 0..n {
        let sum: f64 = class_probs.iter().map(|f| f.values()[voxel]).sum();
        if (sum - 1.0).abs() > NORM_TOL {
            return Err(Error::NormalizationViolation {
                index: voxel,
                sum,
                tolerance: NORM_TOL,
            });
        }
    }

    let mut per_class = BTreeMap::new();
    let mut total = 0.0;
    for (class, field) in class_probs.iter().enumerate() {
        let truth = BinaryField {
            y: labels
                .data()
                .iter()
                .map(|&code| u8::from(code == class as u8))
                .collect(),
        };
        let loss = evaluate(base, field, &truth)?.value;
        per_class.insert(class as u8, loss);
        total += loss;
    }
    Ok(LossReport {
        value: total / f64::from(NUM_CLASSES),
        gradient: None,
        per_class: Some(per_class),
    })
}

/// Binary IOU loss from integer counts; exact for metric checking.
pub fn binary_iou_loss(a: &BinaryField, b: &BinaryField) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.values().iter().zip(b.values()) {
        inter += usize::from(x == 1 && y == 1);
        union += usize::from(x == 1 || y == 1);
    }
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// Binary Dice loss from integer counts.
pub fn binary_dice_loss(a: &BinaryField, b: &BinaryField) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut inter = 0usize;
    let mut total = 0usize;
    for (&x, &y) in a.values().iter().zip(b.values()) {
        inter += usize::from(x == 1 && y == 1);
        total += usize::from(x == 1) + usize::from(y == 1);
    }
    if total == 0 {
        0.0
    } else {
        1.0 - 2.0 * inter as f64 / total as f64
    }
}

/// Dice score `2|A∩B| / (|A| + |B|)` between masks (1 for two empty masks).
pub fn dice_score(a: &Mask, b: &Mask) -> f64 {
    1.0 - binary_dice_loss(&BinaryField::from_mask(a), &BinaryField::from_mask(b))
}
