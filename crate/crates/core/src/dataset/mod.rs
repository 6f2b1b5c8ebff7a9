//! Sequence records, the on-disk dataset layout and label processing.
//!
//! Layout, one directory per sequence:
//!
//! ```text
//! <root>/<seq_id>/meta.toml        id, fps, resolution, tags, declared attributes
//! <root>/<seq_id>/groundtruth.txt  one `x,y,w,h` line per frame
//! <root>/<seq_id>/keyframes.txt    optional `frame_index,x,y,w,h` lines
//! <root>/<seq_id>/frames/%06d.png  optional image frames, 0-based
//! ```

mod attributes;
mod track;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use attributes::{
    compute_auto_attributes, Attribute, AttributeSet, AutoAttributes, LOW_RES_AREA, RATIO_HIGH, RATIO_LOW,
};
pub use track::{
    interpolate_track, resample_timeline, resampled_len, scale_annotations, KeyframeTrack, Resolution, MAX_KEYFRAME_GAP,
};

use crate::geometry::BBox;

/// Slowest frame rate accepted for a sequence.
pub const MIN_FPS: f64 = 10.0;

/// Tolerance when checking groundtruth.txt against keyframes.txt; both are
/// decimal text so exact equality is too strict.
const KEYFRAME_MATCH_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("keyframe list is empty")]
    EmptyKeyframes,
    #[error("invalid keyframes: {0}")]
    InvalidKeyframes(String),
    #[error("invalid frame rate: {0}")]
    InvalidRate(String),
    #[error("{path}: missing required file")]
    MissingFile { path: PathBuf },
    #[error("{path}:{line}: {msg}")]
    Malformed { path: PathBuf, line: usize, msg: String },
    #[error("sequence {id}: {msg}")]
    FrameCountMismatch { id: String, msg: String },
    #[error("sequence {id}: {msg}")]
    Invariant { id: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Non-fatal findings while loading.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetWarning {
    KeyframeGap { sequence: String, from: usize, to: usize },
    AutoAttributeMismatch { sequence: String, attribute: Attribute, stored: bool, computed: bool },
}

impl fmt::Display for DatasetWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetWarning::KeyframeGap { sequence, from, to } => {
                write!(f, "{sequence}: keyframes {from} and {to} are {} frames apart (> {MAX_KEYFRAME_GAP})", to - from)
            }
            DatasetWarning::AutoAttributeMismatch { sequence, attribute, stored, computed } => {
                write!(f, "{sequence}: stored {attribute}={stored} but labels give {attribute}={computed}")
            }
        }
    }
}

/// One annotated sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub id: String,
    pub frame_count: usize,
    pub fps: f64,
    pub resolution: Resolution,
    pub animal: String,
    pub habitat: String,
    pub behavior: String,
    pub track: Vec<BBox>,
    /// Declared attributes with SV/ARC/LR taken from the labels.
    pub attributes: AttributeSet,
    /// SV/ARC/LR as stored in meta.toml, when present.
    pub stored_auto: Option<AutoAttributes>,
    pub keyframes: Option<KeyframeTrack>,
    /// Directory holding numbered PNG frames, if the sequence has pixels.
    pub frame_source: Option<PathBuf>,
}

impl SequenceRecord {
    /// Build a record from a dense track, computing the automatic attributes.
    pub fn new(
        id: impl Into<String>,
        fps: f64,
        resolution: Resolution,
        track: Vec<BBox>,
        manual: AttributeSet,
    ) -> Self {
        let mut attributes = manual;
        attributes.apply_auto(compute_auto_attributes(&track));
        Self {
            id: id.into(),
            frame_count: track.len(),
            fps,
            resolution,
            animal: String::new(),
            habitat: String::new(),
            behavior: String::new(),
            track,
            attributes,
            stored_auto: None,
            keyframes: None,
            frame_source: None,
        }
    }

    pub fn with_tags(mut self, animal: &str, habitat: &str, behavior: &str) -> Self {
        self.animal = animal.into();
        self.habitat = habitat.into();
        self.behavior = behavior.into();
        self
    }

    pub fn frame_path(&self, index: usize) -> Option<PathBuf> {
        self.frame_source.as_ref().map(|dir| dir.join(frame_file_name(index)))
    }

    /// Auto attributes recomputed after rescaling the labels to 854x480.
    /// LR depends on absolute area, so this can differ from the stored-resolution value.
    pub fn auto_attributes_at_standard_resolution(&self) -> AutoAttributes {
        compute_auto_attributes(&scale_annotations(&self.track, self.resolution, Resolution::STANDARD_480P))
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let invariant = |msg: String| DatasetError::Invariant { id: self.id.clone(), msg };
        if self.track.len() != self.frame_count {
            return Err(DatasetError::FrameCountMismatch {
                id: self.id.clone(),
                msg: format!("track has {} boxes for {} frames", self.track.len(), self.frame_count),
            });
        }
        if self.track.is_empty() {
            return Err(invariant("sequence has no frames".into()));
        }
        if let Some(i) = self.track.iter().position(|b| !b.is_valid()) {
            return Err(invariant(format!("frame {i}: box {:?} is not valid", self.track[i])));
        }
        if !(self.fps >= MIN_FPS) {
            return Err(invariant(format!("fps {} is below {MIN_FPS}", self.fps)));
        }
        if self.resolution.width == 0 || self.resolution.height == 0 {
            return Err(invariant("resolution must be positive".into()));
        }
        self.attributes.check_invariants().map_err(invariant)
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("{index:06}.png")
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    id: String,
    fps: f64,
    resolution: [u32; 2],
    #[serde(default)]
    animal: String,
    #[serde(default)]
    habitat: String,
    #[serde(default)]
    behavior: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame_count: Option<usize>,
    #[serde(default)]
    attributes: BTreeMap<String, bool>,
}

/// Result of [`load_dataset`].
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub root: PathBuf,
    pub sequences: Vec<SequenceRecord>,
    pub warnings: Vec<DatasetWarning>,
}

impl LoadedDataset {
    pub fn get(&self, id: &str) -> Option<&SequenceRecord> {
        self.sequences.iter().find(|s| s.id == id)
    }
}

/// Parse one `x,y,w,h` line.
pub fn parse_box_line(line: &str) -> Result<BBox, String> {
    let fields = parse_fields(line, 4)?;
    Ok(BBox::new(fields[0], fields[1], fields[2], fields[3]))
}

fn parse_fields(line: &str, n: usize) -> Result<Vec<f64>, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != n {
        return Err(format!("expected {n} comma-separated fields, found {}", fields.len()));
    }
    fields.iter().map(|f| f.parse::<f64>().map_err(|e| format!("'{f}': {e}"))).collect()
}

pub fn format_box_line(b: &BBox) -> String {
    format!("{},{},{},{}", b.x, b.y, b.w, b.h)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn read_required(path: &Path) -> Result<String, DatasetError> {
    if !path.is_file() {
        return Err(DatasetError::MissingFile { path: path.to_path_buf() });
    }
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn read_groundtruth(path: &Path) -> Result<Vec<BBox>, DatasetError> {
    let text = read_required(path)?;
    content_lines(&text)
        .map(|(line, l)| {
            parse_box_line(l).map_err(|msg| DatasetError::Malformed { path: path.to_path_buf(), line, msg })
        })
        .collect()
}

fn read_keyframes(path: &Path) -> Result<KeyframeTrack, DatasetError> {
    let text = read_required(path)?;
    let mut kfs = Vec::new();
    for (line, l) in content_lines(&text) {
        let malformed = |msg: String| DatasetError::Malformed { path: path.to_path_buf(), line, msg };
        let f = parse_fields(l, 5).map_err(malformed)?;
        if f[0] < 0.0 || f[0].fract() != 0.0 {
            return Err(malformed(format!("frame index {} is not a non-negative integer", f[0])));
        }
        kfs.push((f[0] as usize, BBox::new(f[1], f[2], f[3], f[4])));
    }
    KeyframeTrack::new(kfs)
}

fn count_frames(dir: &Path) -> Result<usize, DatasetError> {
    let entries = fs::read_dir(dir).map_err(io_err(dir))?;
    let mut n = 0;
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        if entry.path().extension().is_some_and(|e| e == "png") {
            n += 1;
        }
    }
    Ok(n)
}

/// Load and validate one sequence directory.
pub fn load_sequence(dir: &Path) -> Result<(SequenceRecord, Vec<DatasetWarning>), DatasetError> {
    let meta_path = dir.join("meta.toml");
    let meta_text = read_required(&meta_path)?;
    let meta: MetaFile = toml::from_str(&meta_text).map_err(|e| DatasetError::Malformed {
        path: meta_path.clone(),
        line: e.span().map_or(0, |s| meta_text[..s.start].lines().count().max(1)),
        msg: e.message().to_string(),
    })?;

    let gt_path = dir.join("groundtruth.txt");
    let track = read_groundtruth(&gt_path)?;
    let mut warnings = Vec::new();

    let mut declared = AttributeSet::default();
    let mut stored = BTreeMap::new();
    for (key, value) in &meta.attributes {
        let attr: Attribute =
            key.parse().map_err(|msg| DatasetError::Malformed { path: meta_path.clone(), line: 0, msg })?;
        if attr.is_auto() {
            stored.insert(attr, *value);
        } else {
            declared.set(attr, *value);
        }
    }

    if let Some(n) = meta.frame_count {
        if n != track.len() {
            return Err(DatasetError::FrameCountMismatch {
                id: meta.id,
                msg: format!("meta.toml declares {n} frames, groundtruth.txt has {}", track.len()),
            });
        }
    }

    let kf_path = dir.join("keyframes.txt");
    let keyframes = if kf_path.is_file() {
        let kfs = read_keyframes(&kf_path)?;
        let dense = interpolate_track(&kfs, track.len())?;
        if let Some(i) = dense.iter().zip(&track).position(|(a, b)| {
            a.to_array().iter().zip(b.to_array()).any(|(p, q)| (p - q).abs() > KEYFRAME_MATCH_TOL * q.abs().max(1.0))
        }) {
            return Err(DatasetError::Invariant {
                id: meta.id,
                msg: format!("groundtruth.txt frame {i} differs from the keyframe interpolation"),
            });
        }
        for (from, to) in kfs.oversized_gaps() {
            warnings.push(DatasetWarning::KeyframeGap { sequence: meta.id.clone(), from, to });
        }
        Some(kfs)
    } else {
        None
    };

    let frames_dir = dir.join("frames");
    let frame_source = if frames_dir.is_dir() {
        let n = count_frames(&frames_dir)?;
        if n != track.len() {
            return Err(DatasetError::FrameCountMismatch {
                id: meta.id,
                msg: format!("{n} image frames for {} labels", track.len()),
            });
        }
        Some(frames_dir)
    } else {
        None
    };

    let mut record = SequenceRecord::new(
        meta.id,
        meta.fps,
        Resolution::new(meta.resolution[0], meta.resolution[1]),
        track,
        declared,
    );
    record.animal = meta.animal;
    record.habitat = meta.habitat;
    record.behavior = meta.behavior;
    record.keyframes = keyframes;
    record.frame_source = frame_source;
    record.validate()?;

    if !stored.is_empty() {
        let computed = record.attributes.auto();
        let stored_auto = AutoAttributes {
            sv: stored.get(&Attribute::SV).copied().unwrap_or(computed.sv),
            arc: stored.get(&Attribute::ARC).copied().unwrap_or(computed.arc),
            lr: stored.get(&Attribute::LR).copied().unwrap_or(computed.lr),
        };
        for (attr, s, c) in [
            (Attribute::SV, stored_auto.sv, computed.sv),
            (Attribute::ARC, stored_auto.arc, computed.arc),
            (Attribute::LR, stored_auto.lr, computed.lr),
        ] {
            if s != c {
                warnings.push(DatasetWarning::AutoAttributeMismatch {
                    sequence: record.id.clone(),
                    attribute: attr,
                    stored: s,
                    computed: c,
                });
            }
        }
        record.stored_auto = Some(stored_auto);
    }
    Ok((record, warnings))
}

/// Load every sequence directory under `root`, in name order.
pub fn load_dataset(root: &Path) -> Result<LoadedDataset, DatasetError> {
    let entries = fs::read_dir(root).map_err(io_err(root))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_err(root))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();

    let mut sequences = Vec::with_capacity(dirs.len());
    let mut warnings = Vec::new();
    for dir in dirs {
        let (record, w) = load_sequence(&dir)?;
        sequences.push(record);
        warnings.extend(w);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(LoadedDataset { root: root.to_path_buf(), sequences, warnings })
}

/// Write meta.toml, groundtruth.txt and (if present) keyframes.txt for one
/// record. Frames are not touched.
pub fn save_sequence(root: &Path, record: &SequenceRecord) -> Result<PathBuf, DatasetError> {
    let dir = root.join(&record.id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let attributes = Attribute::ALL
        .iter()
        .map(|a| {
            let value = match (a.is_auto(), record.stored_auto) {
                (true, Some(stored)) => match a {
                    Attribute::SV => stored.sv,
                    Attribute::ARC => stored.arc,
                    _ => stored.lr,
                },
                _ => record.attributes.get(*a),
            };
            (a.code().to_string(), value)
        })
        .collect();
    let meta = MetaFile {
        id: record.id.clone(),
        fps: record.fps,
        resolution: [record.resolution.width, record.resolution.height],
        animal: record.animal.clone(),
        habitat: record.habitat.clone(),
        behavior: record.behavior.clone(),
        frame_count: Some(record.frame_count),
        attributes,
    };
    let meta_path = dir.join("meta.toml");
    let text = toml::to_string(&meta).expect("meta serializes");
    fs::write(&meta_path, text).map_err(io_err(&meta_path))?;

    let gt_path = dir.join("groundtruth.txt");
    let mut gt = String::new();
    for b in &record.track {
        gt.push_str(&format_box_line(b));
        gt.push('\n');
    }
    fs::write(&gt_path, gt).map_err(io_err(&gt_path))?;

    if let Some(kfs) = &record.keyframes {
        let kf_path = dir.join("keyframes.txt");
        let mut text = String::new();
        for (i, b) in kfs.keyframes() {
            text.push_str(&format!("{i},{}\n", format_box_line(b)));
        }
        fs::write(&kf_path, text).map_err(io_err(&kf_path))?;
    }
    Ok(dir)
}

pub fn save_dataset(root: &Path, sequences: &[SequenceRecord]) -> Result<(), DatasetError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    for s in sequences {
        save_sequence(root, s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_groundtruth_line() {
        assert_eq!(parse_box_line("12.5,30,40,20").unwrap(), BBox::new(12.5, 30.0, 40.0, 20.0));
        assert_eq!(parse_box_line(" 1, 2 ,3,4 ").unwrap(), BBox::new(1.0, 2.0, 3.0, 4.0));
        assert!(parse_box_line("1,2,3").is_err());
        assert!(parse_box_line("1,2,3,x").is_err());
    }

    #[test]
    fn box_line_round_trips() {
        let b = BBox::new(44.479166666666664, 0.1, 1e-3, 30.0);
        assert_eq!(parse_box_line(&format_box_line(&b)).unwrap(), b);
        assert_eq!(format_box_line(&BBox::new(12.5, 30.0, 40.0, 20.0)), "12.5,30,40,20");
    }

    #[test]
    fn validate_rejects_slow_sequences() {
        let rec = SequenceRecord::new(
            "slow",
            5.0,
            Resolution::new(100, 100),
            vec![BBox::new(0.0, 0.0, 10.0, 10.0)],
            AttributeSet::default(),
        );
        assert!(matches!(rec.validate(), Err(DatasetError::Invariant { .. })));
    }
}
