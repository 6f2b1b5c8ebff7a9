//! Repeated evaluation of trackers over a dataset.

use std::collections::BTreeSet;

use reefloop_core::dataset::{LoadedDataset, SequenceRecord};
use reefloop_core::metrics::{build_report, FailedRun, MetricReport, MetricsConfig, ReportWarning, TrackRun};
use reefloop_core::tracker::{Frame, Tracker};

use crate::store::{unix_time, RunMeta, RunStatus, RunStore};
use crate::trackers::TrackerSpec;
use crate::SessionError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkConfig {
    /// Repetitions per (tracker, sequence).
    pub runs: usize,
    pub metrics: MetricsConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self { runs: 5, metrics: MetricsConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub report: MetricReport,
    /// Every completed run, including those of dropped trackers.
    pub runs: Vec<TrackRun>,
    pub failed: Vec<FailedRun>,
    /// Trackers left out of the report because some sequence has no
    /// completed run.
    pub dropped: Vec<String>,
    pub warnings: Vec<String>,
    /// Store ids of the saved repetitions.
    pub run_ids: Vec<String>,
}

fn load_frame(seq: &SequenceRecord, index: usize, blank: bool) -> Result<Frame, String> {
    let ts = index as f64 / seq.fps;
    match seq.frame_path(index) {
        Some(path) => Frame::load_png(&path, ts).map_err(|e| e.to_string()),
        None if blank => Ok(Frame::filled(seq.resolution.width, seq.resolution.height, [0, 0, 0], ts)),
        None => Err(SessionError::NoFrames(seq.id.clone()).to_string()),
    }
}

/// Track one sequence from its first ground-truth box. The init frame's
/// box is the ground truth itself and carries no latency.
pub fn run_sequence(
    tracker: &mut dyn Tracker,
    tracker_id: &str,
    seq: &SequenceRecord,
    run_index: usize,
    blank_frames: bool,
) -> Result<TrackRun, String> {
    let first = *seq.track.first().ok_or("sequence has no frames")?;
    tracker.init(&load_frame(seq, 0, blank_frames)?, first).map_err(|e| format!("init: {e}"))?;
    let mut boxes = vec![Some(first)];
    let mut confidences = vec![1.0];
    let mut latencies_ms = Vec::with_capacity(seq.frame_count);
    for i in 1..seq.frame_count {
        let out = tracker.track(&load_frame(seq, i, blank_frames)?).map_err(|e| format!("frame {i}: {e}"))?;
        boxes.push(Some(out.bbox));
        confidences.push(out.confidence);
        latencies_ms.push(out.latency_ms);
    }
    Ok(TrackRun {
        sequence_id: seq.id.clone(),
        tracker_id: tracker_id.into(),
        run_index,
        boxes,
        confidences: Some(confidences),
        latencies_ms,
    })
}

/// One repetition of one tracker over every sequence. A bridged tracker
/// keeps its connection across sequences and reconnects after a failure.
fn run_repetition(spec: &TrackerSpec, dataset: &LoadedDataset, run_index: usize) -> (Vec<TrackRun>, Vec<FailedRun>) {
    let id = spec.id();
    let mut completed = Vec::new();
    let mut failed = Vec::new();
    let mut bridge: Option<Box<dyn Tracker>> = None;
    for seq in &dataset.sequences {
        let fail =
            |reason: String| FailedRun { sequence_id: seq.id.clone(), tracker_id: id.clone(), run_index, reason };
        if spec.needs_pixels() && seq.frame_source.is_none() {
            failed.push(fail(SessionError::NoFrames(seq.id.clone()).to_string()));
            continue;
        }
        let mut fresh;
        let tracker: &mut dyn Tracker = if spec.is_bridged() {
            if bridge.is_none() {
                match spec.instantiate(None) {
                    Ok(t) => bridge = Some(t),
                    Err(e) => {
                        failed.push(fail(e.to_string()));
                        continue;
                    }
                }
            }
            bridge.as_deref_mut().expect("connected above")
        } else {
            match spec.instantiate(Some(&seq.track)) {
                Ok(t) => {
                    fresh = t;
                    fresh.as_mut()
                }
                Err(e) => {
                    failed.push(fail(e.to_string()));
                    continue;
                }
            }
        };
        match run_sequence(tracker, &id, seq, run_index, !spec.needs_pixels()) {
            Ok(run) => completed.push(run),
            Err(reason) => {
                log::warn!("{id} run {run_index} on {}: {reason}", seq.id);
                failed.push(fail(reason));
                // a bridged session that errored may be out of sync
                bridge = None;
            }
        }
    }
    (completed, failed)
}

/// Run every tracker `config.runs` times over the dataset, persist each
/// repetition when a store is given, and build the report from the
/// completed runs.
pub fn run_benchmark(
    dataset: &LoadedDataset,
    specs: &[TrackerSpec],
    config: &BenchmarkConfig,
    store: Option<&RunStore>,
) -> Result<BenchmarkOutcome, SessionError> {
    let dataset_name = dataset.root.display().to_string();
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    let mut run_ids = Vec::new();
    for spec in specs {
        for run_index in 0..config.runs.max(1) {
            let (done, bad) = run_repetition(spec, dataset, run_index);
            if let Some(store) = store {
                let meta = RunMeta {
                    dataset: dataset_name.clone(),
                    tracker: spec.id(),
                    run_index,
                    timestamp: unix_time(),
                    status: if bad.is_empty() { RunStatus::Complete } else { RunStatus::Failed },
                    failed: bad.clone(),
                };
                run_ids.push(store.save(&meta, &done)?);
            }
            runs.extend(done);
            failed.extend(bad);
        }
    }

    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for spec in specs {
        let id = spec.id();
        let covered: BTreeSet<&str> =
            runs.iter().filter(|r| r.tracker_id == id).map(|r| r.sequence_id.as_str()).collect();
        let missing: Vec<&str> =
            dataset.sequences.iter().map(|s| s.id.as_str()).filter(|s| !covered.contains(s)).collect();
        if !missing.is_empty() {
            warnings.push(format!("{id} dropped from the report: no completed run on {}", missing.join(", ")));
            dropped.push(id);
        }
    }
    let kept: Vec<TrackRun> = runs.iter().filter(|r| !dropped.contains(&r.tracker_id)).cloned().collect();
    let (report, report_warnings) = build_report(&dataset.sequences, &kept, failed.clone(), config.metrics)?;
    let empty: Vec<&str> = report_warnings
        .iter()
        .map(|w| match w {
            ReportWarning::EmptyAttribute(a) => a.code(),
        })
        .collect();
    if !empty.is_empty() {
        warnings.push(format!("no sequence carries {}; left out of the breakdown", empty.join(", ")));
    }
    Ok(BenchmarkOutcome { report, runs, failed, dropped, warnings, run_ids })
}
