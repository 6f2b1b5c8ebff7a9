//! Turning a simulated run into a benchmark sequence.

use std::fs;
use std::path::{Path, PathBuf};

use reefloop_core::dataset::{frame_file_name, save_sequence, Attribute, AttributeSet, Resolution, SequenceRecord};
use reefloop_core::tracker::Frame;
use reefloop_core::BBox;
use reefloop_sim::{MotionModel, Scenario};

use crate::episode::{
    run_episode, EpisodeConfig, EpisodeOutcome, Operator, OperatorCommand, OperatorView, ScriptedOperator, TickRecord,
};
use crate::trackers::TrackerSpec;
use crate::{io_err, SessionError};

pub fn behavior_name(model: &MotionModel) -> &'static str {
    match model {
        MotionModel::ConstantSwim { .. } => "constant-swim",
        MotionModel::StopAndGo { .. } => "stop-and-go",
        MotionModel::Darting { .. } => "darting",
        MotionModel::Crawl { .. } => "crawl",
    }
}

/// Declared attributes of a simulated sequence: the habitat follows the
/// target's motion model, lighting is passive, distractors mean SO.
pub fn scenario_attributes(scenario: &Scenario) -> AttributeSet {
    let habitat =
        if matches!(scenario.animal.motion.model, MotionModel::Crawl { .. }) { Attribute::SB } else { Attribute::MW };
    let mut set = AttributeSet::default().with(habitat).with(Attribute::PL);
    if !scenario.distractors.is_empty() {
        set = set.with(Attribute::SO);
    }
    set
}

/// Saves every frame while the target is in view and stops at the first
/// frame without it.
struct Recorder {
    inner: ScriptedOperator,
    frames_dir: PathBuf,
    track: Vec<BBox>,
    done: bool,
    error: Option<SessionError>,
}

impl Operator for Recorder {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn poll(&mut self, view: &OperatorView) -> Vec<OperatorCommand> {
        self.inner.poll(view)
    }

    fn observe(&mut self, record: &TickRecord, frame: Option<&Frame>) {
        if self.done {
            return;
        }
        let (Some(gt), Some(frame)) = (record.gt, frame) else {
            self.done = true;
            return;
        };
        let path = self.frames_dir.join(frame_file_name(self.track.len()));
        if let Err(e) = frame.save_png(&path) {
            self.error = Some(SessionError::Io { path, source: std::io::Error::other(e.to_string()) });
            self.done = true;
            return;
        }
        self.track.push(gt);
    }

    fn wants_frames(&self) -> bool {
        true
    }

    fn stop_requested(&self) -> bool {
        self.done
    }
}

/// Fly the scenario with the ground-truth-driven servo and write the view
/// as a sequence `<root>/<scenario id>/`. Returns the saved record (with its
/// frame source set) and the episode.
pub fn export_scenario(
    scenario: Scenario,
    config: &EpisodeConfig,
    root: &Path,
) -> Result<(SequenceRecord, EpisodeOutcome), SessionError> {
    let dir = root.join(&scenario.id);
    let frames_dir = dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(io_err(&frames_dir))?;
    let attributes = scenario_attributes(&scenario);
    let behavior = behavior_name(&scenario.animal.motion.model);
    let habitat = if attributes.get(Attribute::SB) { "seabed" } else { "midwater" };
    let resolution = Resolution::new(scenario.camera.width, scenario.camera.height);
    let fps = config.tick_hz.unwrap_or(scenario.frame_rate);
    let id = scenario.id.clone();

    let mut recorder =
        Recorder { inner: ScriptedOperator::default(), frames_dir, track: Vec::new(), done: false, error: None };
    let cfg = EpisodeConfig { tracker: TrackerSpec::Oracle, ..config.clone() };
    let outcome = run_episode(scenario, &cfg, &mut recorder)?;
    if let Some(e) = recorder.error {
        return Err(e);
    }
    if recorder.track.is_empty() {
        return Err(SessionError::Corrupt(format!("target of scenario {id} is never in view")));
    }
    let mut record =
        SequenceRecord::new(id, fps, resolution, recorder.track, attributes).with_tags("synthetic", habitat, behavior);
    save_sequence(root, &record)?;
    record.frame_source = Some(dir.join("frames"));
    Ok((record, outcome))
}
