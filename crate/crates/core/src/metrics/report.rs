use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    aggregate_runs, dataset_scores, evaluate_run, fps_stats, Curve, FpsStats, MetricsConfig, MetricsError, RunScores,
    Scores, SequenceScores,
};
use crate::dataset::{Attribute, SequenceRecord};

/// Metric names used for curve files: `curves/<tracker>_<metric>.csv`.
pub const CURVE_METRICS: [&str; 3] = ["success", "precision", "norm_precision"];

/// Scores restricted to the sequences carrying one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeScores {
    pub attribute: Attribute,
    pub sequences: Vec<String>,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerReport {
    pub tracker_id: String,
    pub run_count: usize,
    pub overall: Scores,
    pub per_sequence: BTreeMap<String, SequenceScores>,
    pub per_attribute: BTreeMap<Attribute, AttributeScores>,
    pub fps: Option<FpsStats>,
}

/// A run that did not complete and was left out of every aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub sequence_id: String,
    pub tracker_id: String,
    pub run_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: MetricsConfig,
    pub trackers: BTreeMap<String, TrackerReport>,
    /// Trackers ordered by success AUC, best first, for `ALL` and each
    /// attribute with at least one sequence.
    pub rankings: BTreeMap<String, Vec<(String, f64)>>,
    pub failed_runs: Vec<FailedRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportWarning {
    EmptyAttribute(Attribute),
}

impl fmt::Display for ReportWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportWarning::EmptyAttribute(a) => {
                write!(f, "no sequence carries {a}; omitted from the breakdown")
            }
        }
    }
}

/// Evaluate completed runs against the dataset and assemble the full report.
/// Every sequence needs at least one completed run per tracker.
pub fn build_report(
    sequences: &[SequenceRecord],
    runs: &[super::TrackRun],
    failed_runs: Vec<FailedRun>,
    config: MetricsConfig,
) -> Result<(MetricReport, Vec<ReportWarning>), MetricsError> {
    let mut by_tracker: BTreeMap<&str, BTreeMap<&str, Vec<RunScores>>> = BTreeMap::new();
    let mut latencies: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for run in runs {
        let seq = sequences
            .iter()
            .find(|s| s.id == run.sequence_id)
            .ok_or_else(|| MetricsError::UnknownSequence(run.sequence_id.clone()))?;
        let scored = evaluate_run(run, &seq.track, config.success_rule)?;
        by_tracker.entry(&run.tracker_id).or_default().entry(&seq.id).or_default().push(scored);
        latencies.entry(&run.tracker_id).or_default().extend(&run.latencies_ms);
    }

    let mut warnings = Vec::new();
    let subsets: Vec<(Attribute, Vec<&SequenceRecord>)> = Attribute::ALL
        .iter()
        .filter_map(|&a| {
            let seqs: Vec<_> = sequences.iter().filter(|s| s.attributes.get(a)).collect();
            if seqs.is_empty() {
                warnings.push(ReportWarning::EmptyAttribute(a));
                None
            } else {
                Some((a, seqs))
            }
        })
        .collect();

    let mut trackers = BTreeMap::new();
    for (tracker, per_seq_runs) in by_tracker {
        let mut per_sequence = BTreeMap::new();
        for seq in sequences {
            let seq_runs = per_seq_runs
                .get(seq.id.as_str())
                .ok_or_else(|| MetricsError::MissingRuns { sequence: seq.id.clone(), tracker: tracker.to_string() })?;
            per_sequence.insert(seq.id.clone(), aggregate_runs(seq_runs)?);
        }
        let overall = dataset_scores(per_sequence.values(), config.weighting).ok_or(MetricsError::NoRuns)?;
        let per_attribute = subsets
            .iter()
            .map(|(a, seqs)| {
                let members: Vec<&SequenceScores> = seqs.iter().map(|s| &per_sequence[&s.id]).collect();
                let scores = dataset_scores(members.iter().copied(), config.weighting).expect("non-empty subset");
                (*a, AttributeScores { attribute: *a, sequences: seqs.iter().map(|s| s.id.clone()).collect(), scores })
            })
            .collect();
        let fps = latencies.get(tracker).and_then(|l| fps_stats(l).ok());
        trackers.insert(
            tracker.to_string(),
            TrackerReport {
                tracker_id: tracker.to_string(),
                run_count: per_seq_runs.values().map(Vec::len).sum(),
                overall,
                per_sequence,
                per_attribute,
                fps,
            },
        );
    }

    let mut rankings = BTreeMap::new();
    let rank = |auc: &dyn Fn(&TrackerReport) -> Option<f64>| {
        let mut r: Vec<(String, f64)> =
            trackers.values().filter_map(|t| auc(t).map(|a| (t.tracker_id.clone(), a))).collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        r
    };
    rankings.insert("ALL".to_string(), rank(&|t| Some(t.overall.success.auc)));
    for (a, _) in &subsets {
        rankings.insert(a.code().to_string(), rank(&|t| t.per_attribute.get(a).map(|s| s.scores.success.auc)));
    }

    for w in &warnings {
        log::debug!("{w}");
    }
    Ok((MetricReport { config, trackers, rankings, failed_runs }, warnings))
}

/// Header of the flat CSV table.
pub const CSV_HEADER: &str = "tracker,subset,sequences,success_auc,precision_20px,norm_precision_auc,mean_fps";

impl MetricReport {
    /// Flat table: one row per tracker and subset (`ALL` plus the selected
    /// attributes; every attribute when `attrs` is `None`).
    pub fn to_csv(&self, attrs: Option<&[Attribute]>) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let fmt_fps = |f: &Option<FpsStats>| f.map_or(String::new(), |f| format!("{}", f.mean_fps));
        for t in self.trackers.values() {
            let row = |subset: &str, n: usize, s: &Scores| {
                format!(
                    "{},{},{},{},{},{},{}\n",
                    t.tracker_id,
                    subset,
                    n,
                    s.success.auc,
                    s.precision.score,
                    s.normalized_precision.score,
                    fmt_fps(&t.fps)
                )
            };
            out.push_str(&row("ALL", t.per_sequence.len(), &t.overall));
            for (a, sub) in &t.per_attribute {
                if attrs.is_none_or(|sel| sel.contains(a)) {
                    out.push_str(&row(a.code(), sub.sequences.len(), &sub.scores));
                }
            }
        }
        out
    }

    /// Copy of the report keeping only the selected attribute breakdowns.
    pub fn filter_attributes(&self, attrs: &[Attribute]) -> MetricReport {
        let mut out = self.clone();
        for t in out.trackers.values_mut() {
            t.per_attribute.retain(|a, _| attrs.contains(a));
        }
        out.rankings.retain(|k, _| k == "ALL" || attrs.iter().any(|a| a.code() == k));
        out
    }

    /// Write `report.json`, `report.csv` and `curves/<tracker>_<metric>.csv`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir.join("curves"))?;
        let json = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(dir.join("report.json"), json)?;
        fs::write(dir.join("report.csv"), self.to_csv(None))?;
        for t in self.trackers.values() {
            let curves: [&Curve; 3] =
                [&t.overall.success.curve, &t.overall.precision.curve, &t.overall.normalized_precision.curve];
            for (metric, curve) in CURVE_METRICS.iter().zip(curves) {
                let mut text = String::from("threshold,value\n");
                for (th, v) in curve.thresholds.iter().zip(&curve.values) {
                    text.push_str(&format!("{th},{v}\n"));
                }
                let name = format!("{}_{metric}.csv", sanitize(&t.tracker_id));
                fs::write(dir.join("curves").join(name), text)?;
            }
        }
        Ok(())
    }

    pub fn read_from(dir: &Path) -> io::Result<MetricReport> {
        let text = fs::read_to_string(dir.join("report.json"))?;
        serde_json::from_str(&text).map_err(io::Error::other)
    }
}

/// File-name-safe form of a tracker id (`bridge:tcp://..` contains separators).
pub fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}
