use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::geometry::BBox;

/// Largest keyframe spacing expected from the labelling practice. Larger
/// gaps are reported, not rejected.
pub const MAX_KEYFRAME_GAP: usize = 15;

/// Image resolution in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: u32,
    pub height: u32,
}

impl Resolution {
    pub const STANDARD_480P: Resolution = Resolution { width: 854, height: 480 };

    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }
}

/// Sparse hand labels: strictly increasing frame indices starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeTrack {
    keyframes: Vec<(usize, BBox)>,
}

impl KeyframeTrack {
    pub fn new(keyframes: Vec<(usize, BBox)>) -> Result<Self, DatasetError> {
        let Some(&(first, _)) = keyframes.first() else {
            return Err(DatasetError::EmptyKeyframes);
        };
        if first != 0 {
            return Err(DatasetError::InvalidKeyframes(format!("first keyframe is at frame {first}, expected 0")));
        }
        for pair in keyframes.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(DatasetError::InvalidKeyframes(format!(
                    "frame index {} does not follow {}",
                    pair[1].0, pair[0].0
                )));
            }
        }
        Ok(Self { keyframes })
    }

    pub fn keyframes(&self) -> &[(usize, BBox)] {
        &self.keyframes
    }

    pub fn last_index(&self) -> usize {
        self.keyframes.last().map_or(0, |k| k.0)
    }

    /// Pairs of consecutive keyframes further apart than [`MAX_KEYFRAME_GAP`].
    pub fn oversized_gaps(&self) -> Vec<(usize, usize)> {
        self.keyframes.windows(2).filter(|p| p[1].0 - p[0].0 > MAX_KEYFRAME_GAP).map(|p| (p[0].0, p[1].0)).collect()
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a * (1.0 - t) + b * t
}

/// Dense per-frame boxes from keyframes: exact at keyframes, per-field
/// linear in between, the last box held to the end.
pub fn interpolate_track(keyframes: &KeyframeTrack, frame_count: usize) -> Result<Vec<BBox>, DatasetError> {
    if keyframes.last_index() >= frame_count {
        return Err(DatasetError::InvalidKeyframes(format!(
            "keyframe at frame {} beyond frame count {frame_count}",
            keyframes.last_index()
        )));
    }
    let kfs = keyframes.keyframes();
    let mut out = Vec::with_capacity(frame_count);
    for pair in kfs.windows(2) {
        let ((i, a), (j, b)) = (pair[0], pair[1]);
        out.push(a);
        for k in i + 1..j {
            let t = (k - i) as f64 / (j - i) as f64;
            out.push(BBox::new(lerp(a.x, b.x, t), lerp(a.y, b.y, t), lerp(a.w, b.w, t), lerp(a.h, b.h, t)));
        }
    }
    let (_, last) = kfs[kfs.len() - 1];
    out.resize(frame_count, last);
    Ok(out)
}

/// Output length when decimating `len` frames from `src_fps` to `dst_fps`.
pub fn resampled_len(len: usize, src_fps: f64, dst_fps: f64) -> usize {
    let exact = len as f64 * dst_fps / src_fps;
    // absorb representation error so integer ratios do not round up
    (exact - 1e-9).ceil().max(0.0) as usize
}

/// Decimate a dense track to a lower frame rate by nearest-index selection.
pub fn resample_timeline<T: Clone>(track: &[T], src_fps: f64, dst_fps: f64) -> Result<Vec<T>, DatasetError> {
    if !(src_fps > 0.0 && dst_fps > 0.0) {
        return Err(DatasetError::InvalidRate(format!("frame rates must be positive (got {src_fps} -> {dst_fps})")));
    }
    if dst_fps > src_fps {
        return Err(DatasetError::InvalidRate(format!("upsampling from {src_fps} to {dst_fps} fps is not supported")));
    }
    if track.is_empty() {
        return Ok(Vec::new());
    }
    let step = src_fps / dst_fps;
    let last = track.len() - 1;
    Ok((0..resampled_len(track.len(), src_fps, dst_fps))
        .map(|t| {
            let idx = (t as f64 * step).round() as usize;
            track[idx.min(last)].clone()
        })
        .collect())
}

/// Rescale boxes from one image resolution to another, per axis.
pub fn scale_annotations(track: &[BBox], src: Resolution, dst: Resolution) -> Vec<BBox> {
    let sx = dst.width as f64 / src.width as f64;
    let sy = dst.height as f64 / src.height as f64;
    track.iter().map(|b| b.scale(sx, sy)).collect()
}
