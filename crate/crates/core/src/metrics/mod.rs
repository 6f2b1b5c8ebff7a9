//! Success / precision / normalized-precision curves, run averaging,
//! attribute breakdowns and frame-rate statistics.

mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{
    build_report, sanitize, AttributeScores, FailedRun, MetricReport, ReportWarning, TrackerReport, CURVE_METRICS,
};

use crate::geometry::{center_error, normalized_center_error, overlap, BBox};

/// Pixel threshold for the headline precision score.
pub const PRECISION_THRESHOLD_PX: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{what}: {pred} predictions for {gt} ground-truth frames")]
    LengthMismatch { what: String, pred: usize, gt: usize },
    #[error("cannot aggregate zero runs")]
    NoRuns,
    #[error("runs mix {0}")]
    MixedRuns(String),
    #[error("no latencies recorded")]
    NoLatencies,
    #[error("latencies sum to zero")]
    ZeroLatency,
    #[error("sequence {sequence} has no completed run for tracker {tracker}")]
    MissingRuns { sequence: String, tracker: String },
    #[error("run refers to unknown sequence {0}")]
    UnknownSequence(String),
}

/// Whether a frame counts as a success when its IoU equals the threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SuccessRule {
    /// IoU >= threshold; a perfect tracker scores 1 everywhere.
    #[default]
    Inclusive,
    /// IoU > threshold.
    Strict,
}

/// How per-sequence curves combine into dataset-level curves.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    /// Every sequence counts once.
    #[default]
    PerSequence,
    /// Sequences weigh by their frame count.
    PerFrame,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub success_rule: SuccessRule,
    pub weighting: Weighting,
}

/// One tracker's output over one sequence (one of several repeated runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRun {
    pub sequence_id: String,
    pub tracker_id: String,
    pub run_index: usize,
    pub boxes: Vec<Option<BBox>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidences: Option<Vec<f64>>,
    pub latencies_ms: Vec<f64>,
}

/// 21 IoU thresholds, 0 to 1 in steps of 0.05.
pub fn success_thresholds() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// 51 pixel thresholds, 0 to 50.
pub fn precision_thresholds() -> Vec<f64> {
    (0..=50).map(|i| i as f64).collect()
}

/// 51 normalized thresholds, 0 to 0.5 in steps of 0.01.
pub fn normalized_precision_thresholds() -> Vec<f64> {
    (0..=50).map(|i| i as f64 / 100.0).collect()
}

/// Fraction of frames passing at each threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub thresholds: Vec<f64>,
    pub values: Vec<f64>,
}

impl Curve {
    fn from_scores(scores: &[f64], thresholds: Vec<f64>, pass: impl Fn(f64, f64) -> bool) -> Curve {
        let n = scores.len() as f64;
        let values = thresholds
            .iter()
            .map(|&t| if scores.is_empty() { 0.0 } else { scores.iter().filter(|&&s| pass(s, t)).count() as f64 / n })
            .collect();
        Curve { thresholds, values }
    }

    /// Mean over the threshold grid.
    pub fn auc(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Value at the grid point equal to `threshold`, if it is on the grid.
    pub fn value_at(&self, threshold: f64) -> Option<f64> {
        self.thresholds.iter().position(|&t| (t - threshold).abs() < 1e-12).map(|i| self.values[i])
    }

    pub fn is_non_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0])
    }

    /// Weighted pointwise mean of curves sharing a grid.
    pub fn weighted_mean<'a>(curves: impl IntoIterator<Item = (&'a Curve, f64)>) -> Curve {
        let mut iter = curves.into_iter().peekable();
        let first = iter.peek().expect("at least one curve").0;
        let mut values = vec![0.0; first.values.len()];
        let thresholds = first.thresholds.clone();
        let mut total = 0.0;
        for (c, w) in iter {
            debug_assert_eq!(c.thresholds, thresholds);
            for (acc, v) in values.iter_mut().zip(&c.values) {
                *acc += w * v;
            }
            total += w;
        }
        values.iter_mut().for_each(|v| *v /= total);
        Curve { thresholds, values }
    }
}

/// Success curve over the IoU grid; `auc` is the grid mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub curve: Curve,
    pub auc: f64,
}

/// Precision curve over a distance grid with its headline score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCurve {
    pub curve: Curve,
    pub score: f64,
}

fn check_lengths(what: &str, pred: &[Option<BBox>], gt: &[BBox]) -> Result<(), MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::LengthMismatch { what: what.into(), pred: pred.len(), gt: gt.len() });
    }
    Ok(())
}

pub fn success_curve(pred: &[Option<BBox>], gt: &[BBox], rule: SuccessRule) -> Result<SuccessCurve, MetricsError> {
    check_lengths("success", pred, gt)?;
    let ious: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| overlap(p.as_ref(), g)).collect();
    let curve = match rule {
        SuccessRule::Inclusive => Curve::from_scores(&ious, success_thresholds(), |s, t| s >= t),
        SuccessRule::Strict => Curve::from_scores(&ious, success_thresholds(), |s, t| s > t),
    };
    debug_assert!(curve.is_non_increasing());
    Ok(SuccessCurve { auc: curve.auc(), curve })
}

/// Centre-error precision over 0..50 px; the score is the value at 20 px.
pub fn precision_score(pred: &[Option<BBox>], gt: &[BBox]) -> Result<PrecisionCurve, MetricsError> {
    check_lengths("precision", pred, gt)?;
    let errs: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| center_error(p.as_ref(), g)).collect();
    let curve = Curve::from_scores(&errs, precision_thresholds(), |e, d| e <= d);
    debug_assert!(curve.is_non_decreasing());
    let score = curve.value_at(PRECISION_THRESHOLD_PX).expect("20 px on grid");
    Ok(PrecisionCurve { curve, score })
}

/// Normalized-error precision over 0..0.5; the score is the grid AUC.
pub fn normalized_precision_score(pred: &[Option<BBox>], gt: &[BBox]) -> Result<PrecisionCurve, MetricsError> {
    check_lengths("normalized precision", pred, gt)?;
    let errs: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| normalized_center_error(p.as_ref(), g)).collect();
    let curve = Curve::from_scores(&errs, normalized_precision_thresholds(), |e, d| e <= d);
    debug_assert!(curve.is_non_decreasing());
    Ok(PrecisionCurve { score: curve.auc(), curve })
}

/// The three metric families for one run, one sequence or one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub success: SuccessCurve,
    pub precision: PrecisionCurve,
    pub normalized_precision: PrecisionCurve,
}

impl Scores {
    pub fn compute(pred: &[Option<BBox>], gt: &[BBox], rule: SuccessRule) -> Result<Scores, MetricsError> {
        Ok(Scores {
            success: success_curve(pred, gt, rule)?,
            precision: precision_score(pred, gt)?,
            normalized_precision: normalized_precision_score(pred, gt)?,
        })
    }

    /// Weighted mean of curves and headline scores. Panics on empty input.
    pub fn weighted_mean<'a>(items: impl IntoIterator<Item = (&'a Scores, f64)> + Clone) -> Scores {
        let total: f64 = items.clone().into_iter().map(|(_, w)| w).sum();
        let mean = |f: &dyn Fn(&Scores) -> f64| items.clone().into_iter().map(|(s, w)| w * f(s)).sum::<f64>() / total;
        Scores {
            success: SuccessCurve {
                curve: Curve::weighted_mean(items.clone().into_iter().map(|(s, w)| (&s.success.curve, w))),
                auc: mean(&|s| s.success.auc),
            },
            precision: PrecisionCurve {
                curve: Curve::weighted_mean(items.clone().into_iter().map(|(s, w)| (&s.precision.curve, w))),
                score: mean(&|s| s.precision.score),
            },
            normalized_precision: PrecisionCurve {
                curve: Curve::weighted_mean(items.clone().into_iter().map(|(s, w)| (&s.normalized_precision.curve, w))),
                score: mean(&|s| s.normalized_precision.score),
            },
        }
    }
}

/// Scores for a single run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScores {
    pub sequence_id: String,
    pub tracker_id: String,
    pub run_index: usize,
    pub frame_count: usize,
    pub scores: Scores,
}

pub fn evaluate_run(run: &TrackRun, gt: &[BBox], rule: SuccessRule) -> Result<RunScores, MetricsError> {
    Ok(RunScores {
        sequence_id: run.sequence_id.clone(),
        tracker_id: run.tracker_id.clone(),
        run_index: run.run_index,
        frame_count: gt.len(),
        scores: Scores::compute(&run.boxes, gt, rule)?,
    })
}

/// Run-averaged scores for one tracker on one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceScores {
    pub sequence_id: String,
    pub tracker_id: String,
    pub frame_count: usize,
    pub runs: usize,
    pub scores: Scores,
}

/// Arithmetic mean over repeated runs of the same tracker on the same sequence.
pub fn aggregate_runs(runs: &[RunScores]) -> Result<SequenceScores, MetricsError> {
    let first = runs.first().ok_or(MetricsError::NoRuns)?;
    if let Some(r) = runs.iter().find(|r| r.sequence_id != first.sequence_id) {
        return Err(MetricsError::MixedRuns(format!("sequences {} and {}", first.sequence_id, r.sequence_id)));
    }
    if let Some(r) = runs.iter().find(|r| r.tracker_id != first.tracker_id) {
        return Err(MetricsError::MixedRuns(format!("trackers {} and {}", first.tracker_id, r.tracker_id)));
    }
    Ok(SequenceScores {
        sequence_id: first.sequence_id.clone(),
        tracker_id: first.tracker_id.clone(),
        frame_count: first.frame_count,
        runs: runs.len(),
        scores: Scores::weighted_mean(runs.iter().map(|r| (&r.scores, 1.0))),
    })
}

/// Combine per-sequence scores into a dataset-level (or subset) score.
pub fn dataset_scores<'a>(
    sequences: impl IntoIterator<Item = &'a SequenceScores> + Clone,
    weighting: Weighting,
) -> Option<Scores> {
    if sequences.clone().into_iter().next().is_none() {
        return None;
    }
    let weight = move |s: &SequenceScores| match weighting {
        Weighting::PerSequence => 1.0,
        Weighting::PerFrame => s.frame_count as f64,
    };
    let items: Vec<_> = sequences.into_iter().map(|s| (&s.scores, weight(s))).collect();
    Some(Scores::weighted_mean(items))
}

/// Frame-rate summary from per-frame latencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpsStats {
    pub mean_fps: f64,
    pub mean_latency_ms: f64,
    pub median_latency_ms: f64,
    pub p95_latency_ms: f64,
    pub frames: usize,
}

pub fn fps_stats(latencies_ms: &[f64]) -> Result<FpsStats, MetricsError> {
    if latencies_ms.is_empty() {
        return Err(MetricsError::NoLatencies);
    }
    let n = latencies_ms.len();
    let mean = latencies_ms.iter().sum::<f64>() / n as f64;
    if !(mean > 0.0) {
        return Err(MetricsError::ZeroLatency);
    }
    let mut sorted = latencies_ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    // nearest-rank percentile
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    Ok(FpsStats {
        mean_fps: 1000.0 / mean,
        mean_latency_ms: mean,
        median_latency_ms: median,
        p95_latency_ms: sorted[rank - 1],
        frames: n,
    })
}
