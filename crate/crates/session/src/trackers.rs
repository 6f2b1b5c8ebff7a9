//! Tracker specifications as written on the command line.

use std::fmt;
use std::str::FromStr;

use reefloop_core::bridge::{bridge_connect, BridgeEndpoint};
use reefloop_core::tracker::{Frame, NccTracker, TrackStatus, Tracker, TrackerConfig, TrackerError, TrackerOutput};
use reefloop_core::BBox;

use crate::SessionError;

/// Scale step of the `-scale` variants.
pub const SCALE_STEP: f64 = 1.05;
/// Template blend rate of the online (`mosse`) baseline.
pub const ONLINE_RATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum TrackerSpec {
    /// Fixed first-frame template, fixed box size.
    Ncc,
    NccScale,
    /// Online template update with rate [`ONLINE_RATE`].
    Mosse,
    MosseScale,
    /// Replays the ground truth.
    Oracle,
    Bridge(BridgeEndpoint),
}

impl TrackerSpec {
    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn needs_pixels(&self) -> bool {
        !matches!(self, TrackerSpec::Oracle)
    }

    pub fn is_bridged(&self) -> bool {
        matches!(self, TrackerSpec::Bridge(_))
    }

    /// A fresh tracker. The oracle needs the ground truth it replays.
    pub fn instantiate(&self, truth: Option<&[BBox]>) -> Result<Box<dyn Tracker>, SessionError> {
        Ok(match self {
            TrackerSpec::Ncc => Box::new(NccTracker::new(TrackerConfig::fixed_template())),
            TrackerSpec::NccScale => {
                Box::new(NccTracker::new(TrackerConfig::fixed_template().with_scale_search(SCALE_STEP)))
            }
            TrackerSpec::Mosse => Box::new(NccTracker::new(TrackerConfig::online_filter(ONLINE_RATE))),
            TrackerSpec::MosseScale => {
                Box::new(NccTracker::new(TrackerConfig::online_filter(ONLINE_RATE).with_scale_search(SCALE_STEP)))
            }
            TrackerSpec::Oracle => Box::new(OracleTracker::new(truth.unwrap_or_default().to_vec())),
            TrackerSpec::Bridge(endpoint) => Box::new(bridge_connect(endpoint)?),
        })
    }
}

impl fmt::Display for TrackerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackerSpec::Ncc => f.write_str("ncc"),
            TrackerSpec::NccScale => f.write_str("ncc-scale"),
            TrackerSpec::Mosse => f.write_str("mosse"),
            TrackerSpec::MosseScale => f.write_str("mosse-scale"),
            TrackerSpec::Oracle => f.write_str("oracle"),
            TrackerSpec::Bridge(e) => write!(f, "bridge:{e}"),
        }
    }
}

impl FromStr for TrackerSpec {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Ok(match s {
            "ncc" => TrackerSpec::Ncc,
            "ncc-scale" => TrackerSpec::NccScale,
            "mosse" => TrackerSpec::Mosse,
            "mosse-scale" => TrackerSpec::MosseScale,
            "oracle" => TrackerSpec::Oracle,
            _ => {
                let endpoint = s.strip_prefix("bridge:").ok_or_else(|| SessionError::UnknownTracker(s.into()))?;
                TrackerSpec::Bridge(endpoint.parse().map_err(|_| SessionError::UnknownTracker(s.into()))?)
            }
        })
    }
}

/// Returns the stored ground-truth box for each successive frame: frame 0
/// at init, then one box per `track` call.
pub struct OracleTracker {
    truth: Vec<BBox>,
    next: Option<usize>,
}

impl OracleTracker {
    pub fn new(truth: Vec<BBox>) -> Self {
        Self { truth, next: None }
    }
}

impl Tracker for OracleTracker {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn init(&mut self, _frame: &Frame, _bbox: BBox) -> Result<(), TrackerError> {
        self.next = Some(1);
        Ok(())
    }

    fn track(&mut self, _frame: &Frame) -> Result<TrackerOutput, TrackerError> {
        let i = self.next.ok_or(TrackerError::NotInitialized)?;
        let bbox = *self.truth.get(i).or(self.truth.last()).ok_or(TrackerError::NotInitialized)?;
        self.next = Some(i + 1);
        Ok(TrackerOutput { bbox, confidence: 1.0, latency_ms: 0.0, status: TrackStatus::Ready })
    }
}
