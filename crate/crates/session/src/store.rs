//! On-disk records of benchmark runs and closed-loop episodes.
//!
//! ```text
//! <root>/runs/<id>/run.jsonl        one line per (sequence, frame)
//! <root>/runs/<id>/meta.json
//! <root>/episodes/<id>/log.jsonl    header, one line per tick, transitions
//! <root>/episodes/<id>/summary.json
//! ```
//!
//! Records are written into a hidden `.partial-<id>` directory and renamed
//! into place when complete, so a reader never sees half a record and an
//! existing record is never replaced.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use reefloop_core::metrics::{sanitize, FailedRun, TrackRun};
use reefloop_core::BBox;
use serde::{Deserialize, Serialize};

use crate::episode::{EpisodeLog, EpisodeSummary};
use crate::{io_err, SessionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    /// At least one sequence failed; the rest of the run is still recorded.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dataset: String,
    pub tracker: String,
    pub run_index: usize,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub status: RunStatus,
    #[serde(default)]
    pub failed: Vec<FailedRun>,
}

/// One line of `run.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub sequence_id: String,
    pub run_index: usize,
    pub frame: usize,
    #[serde(rename = "box")]
    pub bbox: Option<BBox>,
    pub confidence: Option<f64>,
    /// Absent on the initialization frame.
    pub latency_ms: Option<f64>,
}

pub fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SessionError> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SessionError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| SessionError::Corrupt(format!("{}: {e}", path.display())))
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SessionError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| SessionError::Corrupt(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(value);
    }
    Ok(out)
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), SessionError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item).expect("plain data serializes");
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// A directory of records of one kind.
#[derive(Debug, Clone)]
struct RecordDir {
    dir: PathBuf,
}

impl RecordDir {
    fn open(dir: PathBuf) -> Result<Self, SessionError> {
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir })
    }

    /// Fill a fresh record with `fill` and move it into place.
    fn create(&self, id: &str, fill: impl FnOnce(&Path) -> Result<(), SessionError>) -> Result<PathBuf, SessionError> {
        let target = self.dir.join(id);
        if target.exists() {
            return Err(SessionError::AlreadyExists(target));
        }
        let partial = self.dir.join(format!(".partial-{id}"));
        if partial.exists() {
            fs::remove_dir_all(&partial).map_err(io_err(&partial))?;
        }
        fs::create_dir_all(&partial).map_err(io_err(&partial))?;
        if let Err(e) = fill(&partial) {
            let _ = fs::remove_dir_all(&partial);
            return Err(e);
        }
        if target.exists() {
            let _ = fs::remove_dir_all(&partial);
            return Err(SessionError::AlreadyExists(target));
        }
        fs::rename(&partial, &target).map_err(io_err(&target))?;
        Ok(target)
    }

    fn path(&self, id: &str) -> Result<PathBuf, SessionError> {
        let p = self.dir.join(id);
        if id.starts_with('.') || !p.is_dir() {
            return Err(SessionError::UnknownId(id.into()));
        }
        Ok(p)
    }

    fn list(&self) -> Result<Vec<String>, SessionError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io_err(&self.dir))? {
            let entry = entry.map_err(io_err(&self.dir))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') && entry.path().is_dir() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// `base`, or `base-2`, `base-3`, ... if taken.
    fn fresh_id(&self, base: &str) -> String {
        let mut id = base.to_string();
        let mut n = 2;
        while self.dir.join(&id).exists() {
            id = format!("{base}-{n}");
            n += 1;
        }
        id
    }
}

/// Benchmark runs, one record per (tracker, repetition).
#[derive(Debug, Clone)]
pub struct RunStore {
    records: RecordDir,
}

impl RunStore {
    pub fn open(root: &Path) -> Result<Self, SessionError> {
        Ok(Self { records: RecordDir::open(root.join("runs"))? })
    }

    pub fn dir(&self) -> &Path {
        &self.records.dir
    }

    /// Save one repetition of one tracker over the dataset. Returns the new id.
    pub fn save(&self, meta: &RunMeta, runs: &[TrackRun]) -> Result<String, SessionError> {
        let id = self.records.fresh_id(&format!("{}_run{}", sanitize(&meta.tracker), meta.run_index));
        self.records.create(&id, |dir| {
            write_lines(&dir.join("run.jsonl"), runs.iter().flat_map(frame_records))?;
            write_json(&dir.join("meta.json"), meta)
        })?;
        Ok(id)
    }

    /// Completed per-sequence runs and the metadata of one record.
    pub fn load(&self, id: &str) -> Result<(RunMeta, Vec<TrackRun>), SessionError> {
        let dir = self.records.path(id)?;
        let meta: RunMeta = read_json(&dir.join("meta.json"))?;
        let lines: Vec<FrameRecord> = read_lines(&dir.join("run.jsonl"))?;
        let mut runs: Vec<TrackRun> = Vec::new();
        for rec in lines {
            let start_new =
                runs.last().is_none_or(|r| r.sequence_id != rec.sequence_id || r.run_index != rec.run_index);
            if start_new {
                runs.push(TrackRun {
                    sequence_id: rec.sequence_id.clone(),
                    tracker_id: meta.tracker.clone(),
                    run_index: rec.run_index,
                    boxes: Vec::new(),
                    confidences: Some(Vec::new()),
                    latencies_ms: Vec::new(),
                });
            }
            let run = runs.last_mut().expect("pushed above");
            if rec.frame != run.boxes.len() {
                return Err(SessionError::Corrupt(format!(
                    "run {id}: sequence {} frame {} out of order",
                    rec.sequence_id, rec.frame
                )));
            }
            run.boxes.push(rec.bbox);
            if let Some(c) = run.confidences.as_mut() {
                c.push(rec.confidence.unwrap_or(0.0));
            }
            run.latencies_ms.extend(rec.latency_ms);
        }
        Ok((meta, runs))
    }

    pub fn list(&self) -> Result<Vec<String>, SessionError> {
        self.records.list()
    }
}

fn frame_records(run: &TrackRun) -> impl Iterator<Item = FrameRecord> + '_ {
    // latencies cover the tracked frames, which follow the init frame
    let offset = run.boxes.len().saturating_sub(run.latencies_ms.len());
    run.boxes.iter().enumerate().map(move |(i, b)| FrameRecord {
        sequence_id: run.sequence_id.clone(),
        run_index: run.run_index,
        frame: i,
        bbox: *b,
        confidence: run.confidences.as_ref().and_then(|c| c.get(i).copied()),
        latency_ms: i.checked_sub(offset).and_then(|j| run.latencies_ms.get(j).copied()),
    })
}

/// Closed-loop episode logs.
#[derive(Debug, Clone)]
pub struct EpisodeStore {
    records: RecordDir,
}

impl EpisodeStore {
    pub fn open(root: &Path) -> Result<Self, SessionError> {
        Ok(Self { records: RecordDir::open(root.join("episodes"))? })
    }

    pub fn dir(&self) -> &Path {
        &self.records.dir
    }

    pub fn save(&self, log: &EpisodeLog, summary: &EpisodeSummary) -> Result<String, SessionError> {
        let id = self.records.fresh_id(&sanitize(&log.header.episode_id));
        self.records.create(&id, |dir| {
            write_lines(&dir.join("log.jsonl"), log.lines())?;
            write_json(&dir.join("summary.json"), summary)
        })?;
        Ok(id)
    }

    pub fn path(&self, id: &str) -> Result<PathBuf, SessionError> {
        self.records.path(id)
    }

    pub fn load(&self, id: &str) -> Result<(EpisodeLog, EpisodeSummary), SessionError> {
        let dir = self.records.path(id)?;
        let log = EpisodeLog::from_lines(read_lines(&dir.join("log.jsonl"))?)?;
        Ok((log, read_json(&dir.join("summary.json"))?))
    }

    pub fn list(&self) -> Result<Vec<String>, SessionError> {
        self.records.list()
    }
}
