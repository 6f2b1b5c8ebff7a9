use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use reefloop::export::export_scenario;
use reefloop::{run_benchmark, BenchmarkConfig, EpisodeConfig, RunStore, SessionError, TrackerSpec};
use reefloop_core::bridge::adapter::{serve_connection, AdapterTracker, EchoAdapter};
use reefloop_core::bridge::FrameMode;
use reefloop_core::dataset::{
    frame_file_name, load_dataset, save_sequence, AttributeSet, LoadedDataset, Resolution, SequenceRecord,
};
use reefloop_core::tracker::Frame;
use reefloop_core::BBox;
use reefloop_sim::Scenario;

fn label_only_dataset(root: &std::path::Path) -> LoadedDataset {
    for (i, n) in [12usize, 30, 7].iter().enumerate() {
        let track = (0..*n).map(|k| BBox::new(20.0 + k as f64, 30.0, 40.0 + i as f64, 25.0)).collect();
        let rec = SequenceRecord::new(format!("s{i}"), 30.0, Resolution::new(320, 240), track, AttributeSet::default());
        save_sequence(root, &rec).unwrap();
    }
    load_dataset(root).unwrap()
}

/// Same labels with plain grey frames on disk.
fn framed_dataset(root: &std::path::Path) -> LoadedDataset {
    let ds = label_only_dataset(root);
    for seq in &ds.sequences {
        let dir = root.join(&seq.id).join("frames");
        std::fs::create_dir_all(&dir).unwrap();
        for i in 0..seq.frame_count {
            Frame::filled(320, 240, [90, 90, 90], 0.0).save_png(&dir.join(frame_file_name(i))).unwrap();
        }
    }
    load_dataset(root).unwrap()
}

fn spawn_server<A: AdapterTracker + 'static>(make: fn() -> A) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            thread::spawn(move || {
                let reader = BufReader::new(stream.try_clone().unwrap());
                let _ = serve_connection(reader, stream, &mut make());
            });
        }
    });
    format!("bridge:tcp://{addr}")
}

#[test]
fn oracle_runs_are_stored_and_reload() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = label_only_dataset(&tmp.path().join("ds"));
    let store = RunStore::open(&tmp.path().join("out")).unwrap();
    let config = BenchmarkConfig { runs: 3, ..Default::default() };
    let out = run_benchmark(&ds, &[TrackerSpec::Oracle], &config, Some(&store)).unwrap();
    assert!(out.failed.is_empty() && out.dropped.is_empty());
    assert_eq!(out.run_ids.len(), 3);
    assert_eq!(store.list().unwrap().len(), 3);
    let mut reloaded = Vec::new();
    for id in &out.run_ids {
        let (meta, runs) = store.load(id).unwrap();
        assert_eq!(meta.tracker, "oracle");
        reloaded.extend(runs);
    }
    assert_eq!(reloaded.len(), out.runs.len());
    for run in &out.runs {
        let back = reloaded.iter().find(|r| r.sequence_id == run.sequence_id && r.run_index == run.run_index).unwrap();
        assert_eq!(back.boxes, run.boxes);
    }
    let report = &out.report.trackers["oracle"];
    assert_eq!(report.run_count, 9);
    assert_eq!(report.per_sequence.len(), 3);
}

#[test]
fn pixel_trackers_fail_without_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = label_only_dataset(tmp.path());
    let specs = [TrackerSpec::Oracle, TrackerSpec::Ncc];
    let out = run_benchmark(&ds, &specs, &BenchmarkConfig { runs: 2, ..Default::default() }, None).unwrap();
    assert_eq!(out.failed.len(), 6);
    assert!(out.failed.iter().all(|f| f.tracker_id == "ncc" && f.reason.contains("frames")));
    assert_eq!(out.dropped, vec!["ncc".to_string()]);
    assert!(out.warnings.iter().any(|w| w.contains("ncc dropped")));
    assert!(out.report.trackers.contains_key("oracle"));
    assert!(!out.report.trackers.contains_key("ncc"));
    assert_eq!(out.report.failed_runs.len(), 6);
}

#[test]
fn unreachable_bridge_is_reported_not_fatal() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = framed_dataset(tmp.path());
    // bind then drop to get a port nobody listens on
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let spec: TrackerSpec = format!("bridge:127.0.0.1:{port}").parse().unwrap();
    let out = run_benchmark(&ds, &[spec.clone(), TrackerSpec::Oracle], &BenchmarkConfig::default(), None).unwrap();
    assert_eq!(out.failed.len(), 15);
    assert_eq!(out.dropped, vec![spec.id()]);
    assert_eq!(out.report.trackers.len(), 1);
}

#[test]
fn bridged_echo_tracker_is_scored() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = framed_dataset(tmp.path());
    let spec: TrackerSpec = spawn_server(EchoAdapter::default).parse().unwrap();
    let out = run_benchmark(&ds, std::slice::from_ref(&spec), &BenchmarkConfig { runs: 2, ..Default::default() }, None)
        .unwrap();
    assert!(out.failed.is_empty(), "{:?}", out.failed);
    let report = &out.report.trackers[&spec.id()];
    // the echo box slides off a target moving one pixel per frame
    assert!(report.overall.success.auc < 1.0 && report.overall.success.auc > 0.3);
    assert!(report.fps.is_some());
    for run in &out.runs {
        assert_eq!(run.boxes[0], Some(ds.get(&run.sequence_id).unwrap().track[0]));
        assert_eq!(run.latencies_ms.len(), run.boxes.len() - 1);
    }
}

/// Fails every track request on the sequence whose init box is 41 px wide.
#[derive(Default)]
struct Picky {
    refuse: bool,
    bbox: Option<BBox>,
}

impl AdapterTracker for Picky {
    fn name(&self) -> String {
        "picky".into()
    }

    fn frame_mode(&self) -> FrameMode {
        FrameMode::Inline
    }

    fn init(&mut self, _frame: Frame, bbox: BBox) -> Result<(), String> {
        self.refuse = bbox.w == 41.0;
        self.bbox = Some(bbox);
        Ok(())
    }

    fn track(&mut self, _frame: Frame) -> Result<(BBox, f64), String> {
        if self.refuse {
            return Err("refusing this sequence".into());
        }
        Ok((self.bbox.unwrap(), 1.0))
    }
}

#[test]
fn a_failing_sequence_does_not_poison_the_others() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = framed_dataset(tmp.path());
    let spec: TrackerSpec = spawn_server(Picky::default).parse().unwrap();
    let out = run_benchmark(&ds, std::slice::from_ref(&spec), &BenchmarkConfig { runs: 2, ..Default::default() }, None)
        .unwrap();
    assert_eq!(out.failed.len(), 2);
    assert!(out.failed.iter().all(|f| f.sequence_id == "s1" && f.reason.contains("refusing")));
    assert_eq!(out.runs.len(), 4);
    assert_eq!(out.dropped, vec![spec.id()]);
}

#[test]
fn ncc_follows_an_exported_synthetic_sequence() {
    let tmp = tempfile::tempdir().unwrap();
    let mut s = Scenario::reference_midwater();
    s.duration_s = 8.0;
    export_scenario(s, &EpisodeConfig::default(), tmp.path()).unwrap();
    let ds = load_dataset(tmp.path()).unwrap();
    let out =
        run_benchmark(&ds, &[TrackerSpec::NccScale], &BenchmarkConfig { runs: 1, ..Default::default() }, None).unwrap();
    assert!(out.failed.is_empty());
    let auc = out.report.trackers["ncc-scale"].overall.success.auc;
    assert!(auc > 0.6, "success AUC {auc}");
}

#[test]
fn unknown_tracker_ids_are_rejected() {
    assert!(matches!("kcf".parse::<TrackerSpec>(), Err(SessionError::UnknownTracker(_))));
}

#[test]
fn raw_protocol_lines_are_answered() {
    let spec = spawn_server(EchoAdapter::default);
    let addr = spec.trim_start_matches("bridge:tcp://").to_string();
    let stream = std::net::TcpStream::connect(addr).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    writeln!(writer, r#"{{"type":"hello","version":1}}"#).unwrap();
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    assert!(line.contains("\"hello\"") && line.contains("echo"), "{line}");
}
