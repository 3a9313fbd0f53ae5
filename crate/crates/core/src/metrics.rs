//! Pixel-level precision/recall evaluation against rectangle labels.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelMask;
use crate::tensor::ScoreMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub beta: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { beta: 0.5 }
    }
}

fn check_dims(scores: &ScoreMap, mask: &LabelMask) -> Result<()> {
    if scores.height() != mask.height() || scores.width() != mask.width() {
        return Err(Error::DimensionMismatch {
            entry: "label mask".into(),
            expected_height: scores.height(),
            expected_width: scores.width(),
            height: mask.height(),
            width: mask.width(),
        });
    }
    Ok(())
}

/// Counts with "predicted positive" meaning `score >= threshold`.
pub fn confusion(scores: &ScoreMap, mask: &LabelMask, threshold: f64) -> Result<Confusion> {
    check_dims(scores, mask)?;
    let mut c = Confusion::default();
    for (&s, &p) in scores.scores().iter().zip(mask.positive()) {
        match (s >= threshold, p) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Precision and recall. An empty prediction set has precision 1; a label set
/// with no positives has recall 1.
pub fn precision_recall(c: &Confusion) -> (f64, f64) {
    let precision = if c.tp + c.fp == 0 {
        1.0
    } else {
        c.tp as f64 / (c.tp + c.fp) as f64
    };
    let recall = if c.tp + c.fn_ == 0 {
        1.0
    } else {
        c.tp as f64 / (c.tp + c.fn_) as f64
    };
    (precision, recall)
}

/// Weighted harmonic combination; recall counts `beta` times as much as precision.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom <= 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
}

/// One point per distinct score, ordered by descending threshold (so recall
/// is non-decreasing and reaches 1 at the last point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub prevalence: f64,
    pub positives: usize,
}

/// Exact precision-recall sweep over every distinct score value.
pub fn pr_curve(scores: &ScoreMap, mask: &LabelMask) -> Result<PrCurve> {
    check_dims(scores, mask)?;
    let positives = mask.positive_count();
    let total = mask.positive().len();
    if positives == 0 || positives == total {
        return Err(Error::DegenerateMask);
    }
    let mut order: Vec<(f64, bool)> = scores
        .scores()
        .iter()
        .copied()
        .zip(mask.positive().iter().copied())
        .collect();
    order.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = order[i].0;
        // Equal scores cross the threshold together.
        while i < order.len() && order[i].0 == threshold {
            if order[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
            tp,
            fp,
        });
    }
    Ok(PrCurve {
        points,
        prevalence: positives as f64 / total as f64,
        positives,
    })
}

/// Step-wise area: `Σ (Rᵢ − Rᵢ₋₁)·Pᵢ` with `R₀ = 0` (average precision).
pub fn auprc(curve: &PrCurve) -> f64 {
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for p in &curve.points {
        area += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    area.clamp(0.0, 1.0)
}

/// Threshold (one of the distinct scores) with the highest F-beta; ties go to
/// the higher threshold.
pub fn best_threshold(scores: &ScoreMap, mask: &LabelMask, cfg: &EvalConfig) -> Result<(f64, f64)> {
    let curve = pr_curve(scores, mask)?;
    Ok(best_threshold_on_curve(&curve, cfg))
}

pub fn best_threshold_on_curve(curve: &PrCurve, cfg: &EvalConfig) -> (f64, f64) {
    let mut best = (curve.points[0].threshold, f64::NEG_INFINITY);
    for p in &curve.points {
        let f = f_beta(p.precision, p.recall, cfg.beta);
        if f > best.1 {
            best = (p.threshold, f);
        }
    }
    best
}

/// Writes `threshold,precision,recall` rows in curve order.
pub fn write_curve_csv(curve: &PrCurve, mut out: impl Write) -> Result<()> {
    writeln!(out, "threshold,precision,recall")?;
    for p in &curve.points {
        writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall)?;
    }
    Ok(())
}
