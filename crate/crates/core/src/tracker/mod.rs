//! The tracker contract and the built-in correlation trackers.
//!
//! Two baselines share one implementation ([`NccTracker`]): with a template
//! update rate of zero the first-frame appearance is matched forever; with a
//! positive rate the template follows recent frames and can drift.

mod frame;
mod ncc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use frame::{Frame, FrameError};
pub use ncc::NccTracker;

use crate::bridge::BridgeError;
use crate::geometry::BBox;

/// Smallest accepted initialization box area in px^2.
pub const MIN_INIT_AREA: f64 = 16.0;

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("tracker used before initialization")]
    NotInitialized,
    #[error("init box {0:?} is not inside the frame")]
    BoxOutOfBounds(BBox),
    #[error("init box {0:?} is degenerate (area below {MIN_INIT_AREA} px^2)")]
    DegenerateBox(BBox),
    #[error("frame size changed from {from:?} to {to:?} mid-track")]
    FrameSizeChanged { from: (u32, u32), to: (u32, u32) },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    /// Still inside the simulated start-up phase; the box is provisional.
    Initializing,
    Ready,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerOutput {
    pub bbox: BBox,
    pub confidence: f64,
    pub latency_ms: f64,
    pub status: TrackStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackerKind {
    FixedTemplate,
    OnlineFilter,
    Bridged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub kind: TrackerKind,
    /// Half-width in pixels of the square search window around the previous box.
    pub search_radius: u32,
    /// Template blend factor per frame; zero for the fixed-template tracker.
    pub template_update_rate: f64,
    /// Simulated start-up time during which outputs are flagged as initializing.
    pub init_delay_s: f64,
    /// Ratio between neighbouring candidate scales; 1 keeps the box size fixed.
    #[serde(default = "one")]
    pub scale_step: f64,
    /// Factor applied to the score of a scale change, so that the current
    /// scale wins unless another is clearly better.
    #[serde(default = "default_scale_penalty")]
    pub scale_penalty: f64,
}

fn one() -> f64 {
    1.0
}

fn default_scale_penalty() -> f64 {
    0.99
}

impl TrackerConfig {
    pub fn fixed_template() -> Self {
        Self {
            kind: TrackerKind::FixedTemplate,
            search_radius: 24,
            template_update_rate: 0.0,
            init_delay_s: 0.0,
            scale_step: 1.0,
            scale_penalty: default_scale_penalty(),
        }
    }

    pub fn online_filter(rate: f64) -> Self {
        Self { kind: TrackerKind::OnlineFilter, template_update_rate: rate.clamp(0.0, 1.0), ..Self::fixed_template() }
    }

    pub fn with_search_radius(mut self, radius: u32) -> Self {
        self.search_radius = radius;
        self
    }

    /// Also try the box one `step` larger and smaller every frame.
    pub fn with_scale_search(mut self, step: f64) -> Self {
        self.scale_step = step.max(1.0);
        self
    }

    pub fn with_init_delay(mut self, seconds: f64) -> Self {
        self.init_delay_s = seconds.max(0.0);
        self
    }

    /// Effective blend rate: the fixed-template kind never updates.
    pub fn update_rate(&self) -> f64 {
        match self.kind {
            TrackerKind::FixedTemplate => 0.0,
            _ => self.template_update_rate,
        }
    }
}

/// A single-target tracker. One owner; not shared across threads while
/// tracking, but may be moved between them.
pub trait Tracker: Send {
    fn name(&self) -> String;

    /// (Re)start tracking `bbox` in `frame`.
    fn init(&mut self, frame: &Frame, bbox: BBox) -> Result<(), TrackerError>;

    fn track(&mut self, frame: &Frame) -> Result<TrackerOutput, TrackerError>;
}

impl<T: Tracker + ?Sized> Tracker for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn init(&mut self, frame: &Frame, bbox: BBox) -> Result<(), TrackerError> {
        (**self).init(frame, bbox)
    }

    fn track(&mut self, frame: &Frame) -> Result<TrackerOutput, TrackerError> {
        (**self).track(frame)
    }
}

/// Check an initialization box against the frame.
pub fn check_init_box(frame: &Frame, bbox: &BBox) -> Result<(), TrackerError> {
    if !bbox.is_valid() || bbox.area() < MIN_INIT_AREA {
        return Err(TrackerError::DegenerateBox(*bbox));
    }
    // half a pixel of slack for boxes produced by rounding
    let (w, h) = (frame.width as f64 + 0.5, frame.height as f64 + 0.5);
    if bbox.x < -0.5 || bbox.y < -0.5 || bbox.right() > w || bbox.bottom() > h {
        return Err(TrackerError::BoxOutOfBounds(*bbox));
    }
    Ok(())
}
