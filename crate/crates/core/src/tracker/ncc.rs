use std::borrow::Cow;
use std::time::Instant;

use image::imageops::{self, FilterType};
use image::{ImageBuffer, Luma};

use super::{check_init_box, Frame, TrackStatus, Tracker, TrackerConfig, TrackerError, TrackerOutput};
use crate::geometry::BBox;

/// Summed-area tables of a gray image and of its square.
struct Integrals {
    width: usize,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Integrals {
    fn new(gray: &[f32], width: usize, height: usize) -> Self {
        let stride = width + 1;
        let mut sum = vec![0.0; stride * (height + 1)];
        let mut sq = vec![0.0; stride * (height + 1)];
        for y in 0..height {
            let (mut row, mut row_sq) = (0.0, 0.0);
            for x in 0..width {
                let v = gray[y * width + x] as f64;
                row += v;
                row_sq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
                sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + row_sq;
            }
        }
        Self { width, sum, sq }
    }

    fn rect(table: &[f64], stride: usize, x: usize, y: usize, w: usize, h: usize) -> f64 {
        table[(y + h) * stride + x + w] - table[y * stride + x + w] - table[(y + h) * stride + x]
            + table[y * stride + x]
    }

    /// (sum, sum of squares) over the rectangle.
    fn moments(&self, x: usize, y: usize, w: usize, h: usize) -> (f64, f64) {
        let stride = self.width + 1;
        (Self::rect(&self.sum, stride, x, y, w, h), Self::rect(&self.sq, stride, x, y, w, h))
    }
}

struct State {
    frame_dims: (u32, u32),
    /// Template size in whole pixels.
    tw: usize,
    th: usize,
    /// Integer top-left of the current match.
    px: i64,
    py: i64,
    /// Current box size relative to the init box.
    scale: f64,
    /// Sub-pixel part of the init box, carried into every output box.
    frac: (f64, f64),
    box_size: (f64, f64),
    template: Vec<f64>,
    template_norm_sq: f64,
    initial_template: Vec<f64>,
    init_time: f64,
}

impl State {
    /// Search window size at `scale`.
    fn window(&self, scale: f64) -> (usize, usize) {
        if scale == 1.0 {
            return (self.tw, self.th);
        }
        (
            ((self.tw as f64 * scale).round() as usize).max(MIN_SIDE),
            ((self.th as f64 * scale).round() as usize).max(MIN_SIDE),
        )
    }
}

const MIN_SIDE: usize = 4;
const SCALE_RANGE: (f64, f64) = (0.25, 4.0);

/// Brute-force normalized cross-correlation tracker over a square search window.
pub struct NccTracker {
    config: TrackerConfig,
    state: Option<State>,
}

fn zero_mean(mut patch: Vec<f64>) -> Vec<f64> {
    let mean = patch.iter().sum::<f64>() / patch.len() as f64;
    patch.iter_mut().for_each(|v| *v -= mean);
    patch
}

fn extract_patch(gray: &[f32], width: usize, x: usize, y: usize, w: usize, h: usize) -> Vec<f64> {
    let mut patch = Vec::with_capacity(w * h);
    for row in y..y + h {
        patch.extend(gray[row * width + x..row * width + x + w].iter().map(|&v| v as f64));
    }
    zero_mean(patch)
}

/// Bilinear resample of a row-major patch, zero-mean again afterwards.
fn resample(patch: &[f64], w: usize, h: usize, nw: usize, nh: usize) -> Vec<f64> {
    if (w, h) == (nw, nh) {
        return patch.to_vec();
    }
    let buf: ImageBuffer<Luma<f32>, Vec<f32>> =
        ImageBuffer::from_raw(w as u32, h as u32, patch.iter().map(|&v| v as f32).collect())
            .expect("patch matches its size");
    let out = imageops::resize(&buf, nw as u32, nh as u32, FilterType::Triangle);
    zero_mean(out.into_raw().into_iter().map(f64::from).collect())
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Zero-mean template with its size and squared norm.
struct Template<'a> {
    data: Cow<'a, [f64]>,
    w: usize,
    h: usize,
    norm_sq: f64,
}

impl NccTracker {
    pub fn new(config: TrackerConfig) -> Self {
        Self { config, state: None }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    /// Current (mean-subtracted, grayscale) template, row-major.
    pub fn template_snapshot(&self) -> Option<&[f64]> {
        self.state.as_ref().map(|s| s.template.as_slice())
    }

    pub fn initial_template(&self) -> Option<&[f64]> {
        self.state.as_ref().map(|s| s.initial_template.as_slice())
    }

    /// L2 distance between the current and the initial template.
    pub fn template_drift(&self) -> Option<f64> {
        self.state
            .as_ref()
            .map(|s| s.template.iter().zip(&s.initial_template).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    /// Box size relative to the init box.
    pub fn scale(&self) -> Option<f64> {
        self.state.as_ref().map(|s| s.scale)
    }

    /// NCC of the template against the window with top-left (x, y).
    fn score_at(tpl: &Template, gray: &[f32], integrals: &Integrals, width: usize, x: usize, y: usize) -> f64 {
        let n = (tpl.w * tpl.h) as f64;
        let (sum, sq) = integrals.moments(x, y, tpl.w, tpl.h);
        let var = sq - sum * sum / n;
        if var <= 1e-9 || tpl.norm_sq <= 1e-9 {
            return 0.0;
        }
        // the template is zero-mean, so correlating with the raw patch equals
        // correlating with the mean-subtracted one
        let mut cross = 0.0;
        for row in 0..tpl.h {
            let img = &gray[(y + row) * width + x..(y + row) * width + x + tpl.w];
            let t = &tpl.data[row * tpl.w..(row + 1) * tpl.w];
            cross += img.iter().zip(t).map(|(&p, &t)| p as f64 * t).sum::<f64>();
        }
        cross / (var * tpl.norm_sq).sqrt()
    }
}

impl Tracker for NccTracker {
    fn name(&self) -> String {
        let base = match self.config.kind {
            super::TrackerKind::OnlineFilter => "mosse",
            _ => "ncc",
        };
        if self.config.scale_step > 1.0 {
            format!("{base}-scale")
        } else {
            base.into()
        }
    }

    fn init(&mut self, frame: &Frame, bbox: BBox) -> Result<(), TrackerError> {
        check_init_box(frame, &bbox)?;
        let (width, height) = (frame.width as i64, frame.height as i64);
        let tw = (bbox.w.round() as i64).clamp(1, width);
        let th = (bbox.h.round() as i64).clamp(1, height);
        let px = (bbox.x.round() as i64).clamp(0, width - tw);
        let py = (bbox.y.round() as i64).clamp(0, height - th);
        let gray = frame.gray();
        let template = extract_patch(&gray, frame.width as usize, px as usize, py as usize, tw as usize, th as usize);
        self.state = Some(State {
            frame_dims: frame.dims(),
            tw: tw as usize,
            th: th as usize,
            px,
            py,
            scale: 1.0,
            frac: (bbox.x - px as f64, bbox.y - py as f64),
            box_size: (bbox.w, bbox.h),
            template_norm_sq: norm_sq(&template),
            initial_template: template.clone(),
            template,
            init_time: frame.timestamp,
        });
        Ok(())
    }

    fn track(&mut self, frame: &Frame) -> Result<TrackerOutput, TrackerError> {
        let started = Instant::now();
        let rate = self.config.update_rate();
        let radius = self.config.search_radius as i64;
        let delay = self.config.init_delay_s;
        let (step, penalty) = (self.config.scale_step, self.config.scale_penalty);
        let state = self.state.as_mut().ok_or(TrackerError::NotInitialized)?;
        if frame.dims() != state.frame_dims {
            return Err(TrackerError::FrameSizeChanged { from: state.frame_dims, to: frame.dims() });
        }
        let (width, height) = (frame.width as usize, frame.height as usize);
        let gray = frame.gray();
        let integrals = Integrals::new(&gray, width, height);

        let (ww, wh) = state.window(state.scale);
        let tpl = if (ww, wh) == (state.tw, state.th) {
            Template { data: Cow::Borrowed(&state.template), w: ww, h: wh, norm_sq: state.template_norm_sq }
        } else {
            let data = resample(&state.template, state.tw, state.th, ww, wh);
            Template { norm_sq: norm_sq(&data), data: Cow::Owned(data), w: ww, h: wh }
        };
        // keep the window centered on the previous match when its size rounds differently
        let (ox, oy) = (state.px, state.py);
        let max_x = width.saturating_sub(ww) as i64;
        let max_y = height.saturating_sub(wh) as i64;
        let mut best: Option<(f64, i64, i64)> = None;
        let fits = ww <= width && wh <= height;
        for dy in (-radius..=radius).filter(|_| fits) {
            let y = oy + dy;
            if y < 0 || y > max_y {
                continue;
            }
            for dx in -radius..=radius {
                let x = ox + dx;
                if x < 0 || x > max_x {
                    continue;
                }
                let score = Self::score_at(&tpl, &gray, &integrals, width, x as usize, y as usize);
                let better = match best {
                    None => true,
                    Some((s, bx, by)) => {
                        // ties go to the smaller displacement
                        let d_new = dx * dx + dy * dy;
                        let d_old = (bx - ox).pow(2) + (by - oy).pow(2);
                        score > s || (score == s && d_new < d_old)
                    }
                };
                if better {
                    best = Some((score, x, y));
                }
            }
        }
        let (mut peak, bx, by) = best.unwrap_or((0.0, state.px, state.py));
        state.px = bx;
        state.py = by;

        if step > 1.0 && best.is_some() {
            // compare scales on the template's own pixel grid
            let center = (bx as f64 + ww as f64 / 2.0, by as f64 + wh as f64 / 2.0);
            let score_scale = |scale: f64| -> Option<(f64, i64, i64)> {
                let (sw, sh) = state.window(scale);
                let x = (center.0 - sw as f64 / 2.0).round() as i64;
                let y = (center.1 - sh as f64 / 2.0).round() as i64;
                if x < 0 || y < 0 || x as usize + sw > width || y as usize + sh > height {
                    return None;
                }
                let patch = extract_patch(&gray, width, x as usize, y as usize, sw, sh);
                let patch = resample(&patch, sw, sh, state.tw, state.th);
                let denom = (norm_sq(&patch) * state.template_norm_sq).sqrt();
                let cross: f64 = patch.iter().zip(&state.template).map(|(p, t)| p * t).sum();
                Some((if denom > 1e-9 { cross / denom } else { 0.0 }, x, y))
            };
            if let Some((here, _, _)) = score_scale(state.scale) {
                // (penalized score, raw score, scale, x, y)
                let mut chosen = (here, here, state.scale, bx, by);
                for scale in [state.scale / step, state.scale * step] {
                    if !(SCALE_RANGE.0..=SCALE_RANGE.1).contains(&scale) {
                        continue;
                    }
                    if let Some((score, x, y)) = score_scale(scale) {
                        if score * penalty > chosen.0 {
                            chosen = (score * penalty, score, scale, x, y);
                        }
                    }
                }
                if chosen.2 != state.scale {
                    (_, peak, state.scale, state.px, state.py) = chosen;
                }
            }
        }
        let (bx, by, scale) = (state.px, state.py, state.scale);

        if rate > 0.0 {
            let (ww, wh) = state.window(scale);
            let patch = extract_patch(&gray, width, bx as usize, by as usize, ww, wh);
            let patch = resample(&patch, ww, wh, state.tw, state.th);
            for (t, p) in state.template.iter_mut().zip(&patch) {
                *t = (1.0 - rate) * *t + rate * p;
            }
            state.template_norm_sq = norm_sq(&state.template);
        }

        let bbox = BBox::new(
            bx as f64 + state.frac.0 * scale,
            by as f64 + state.frac.1 * scale,
            state.box_size.0 * scale,
            state.box_size.1 * scale,
        )
        .clamp_inside(width as f64, height as f64);
        let elapsed = frame.timestamp - state.init_time;
        let status =
            if delay > 0.0 && elapsed <= delay + 1e-9 { TrackStatus::Initializing } else { TrackStatus::Ready };
        Ok(TrackerOutput {
            bbox,
            confidence: peak.clamp(0.0, 1.0),
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
            status,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::iou;
    use crate::synthetic::{compose, Background, Placement, Sprite};

    const W: u32 = 160;
    const H: u32 = 120;

    fn scene(sprite: &Sprite, x: i64, y: i64, t: f64) -> Frame {
        compose(W, H, &Background::Noise { seed: 3, cell: 3 }, &[Placement { sprite, x, y }], t)
    }

    /// Plain NCC of `tpl` (w x h, raw gray) against the frame at (x, y).
    fn naive_ncc(gray: &[f32], tpl: &[f64], w: usize, h: usize, x: usize, y: usize) -> f64 {
        let patch: Vec<f64> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .map(|(r, c)| gray[(y + r) * W as usize + x + c] as f64)
            .collect();
        let mp = patch.iter().sum::<f64>() / patch.len() as f64;
        let mt = tpl.iter().sum::<f64>() / tpl.len() as f64;
        let (mut num, mut sp, mut st) = (0.0, 0.0, 0.0);
        for (p, t) in patch.iter().zip(tpl) {
            num += (p - mp) * (t - mt);
            sp += (p - mp) * (p - mp);
            st += (t - mt) * (t - mt);
        }
        if sp == 0.0 || st == 0.0 {
            0.0
        } else {
            num / (sp * st).sqrt()
        }
    }

    #[test]
    fn self_match_returns_init_box() {
        let s = Sprite::textured(24, 16, 3, 9);
        let f = scene(&s, 50, 40, 0.0);
        let init = BBox::new(50.0, 40.0, 24.0, 16.0);
        let mut t = NccTracker::new(TrackerConfig::fixed_template());
        t.init(&f, init).unwrap();
        for _ in 0..3 {
            let out = t.track(&f).unwrap();
            assert_eq!(out.bbox, init);
            assert_eq!(iou(&out.bbox, &init), 1.0);
            assert!(out.confidence > 0.999);
            assert_eq!(out.status, TrackStatus::Ready);
        }
    }

    #[test]
    fn seven_pixel_shift_matches_exhaustive_oracle() {
        let s = Sprite::textured(24, 16, 3, 9);
        let f0 = scene(&s, 50, 40, 0.0);
        let f1 = scene(&s, 57, 40, 0.1);
        let mut t = NccTracker::new(TrackerConfig::fixed_template());
        t.init(&f0, BBox::new(50.0, 40.0, 24.0, 16.0)).unwrap();
        let out = t.track(&f1).unwrap();

        let g0 = f0.gray();
        let tpl: Vec<f64> = (0..16)
            .flat_map(|r| (0..24).map(move |c| (r, c)))
            .map(|(r, c)| g0[(40 + r) * W as usize + 50 + c] as f64)
            .collect();
        let g1 = f1.gray();
        let mut best = (f64::MIN, 0, 0);
        for y in 0..=(H as usize - 16) {
            for x in 0..=(W as usize - 24) {
                let v = naive_ncc(&g1, &tpl, 24, 16, x, y);
                if v > best.0 {
                    best = (v, x, y);
                }
            }
        }
        assert_eq!((best.1, best.2), (57, 40));
        assert_eq!(out.bbox, BBox::new(57.0, 40.0, 24.0, 16.0));
        assert!((out.confidence - best.0).abs() < 1e-6);
    }

    #[test]
    fn subpixel_init_offset_is_carried() {
        let s = Sprite::textured(24, 16, 3, 9);
        let f0 = scene(&s, 50, 40, 0.0);
        let f1 = scene(&s, 53, 38, 0.1);
        let mut t = NccTracker::new(TrackerConfig::fixed_template());
        t.init(&f0, BBox::new(50.25, 39.75, 24.0, 16.0)).unwrap();
        let out = t.track(&f1).unwrap();
        assert_eq!(out.bbox, BBox::new(53.25, 37.75, 24.0, 16.0));
    }

    #[test]
    fn teleport_beyond_radius_drops_confidence() {
        let s = Sprite::textured(24, 16, 3, 9);
        let f0 = scene(&s, 20, 20, 0.0);
        let f1 = scene(&s, 110, 90, 0.1);
        let mut t = NccTracker::new(TrackerConfig::fixed_template());
        t.init(&f0, BBox::new(20.0, 20.0, 24.0, 16.0)).unwrap();
        let out = t.track(&f1).unwrap();
        assert!(out.confidence < 0.5, "confidence {}", out.confidence);
        let c = out.bbox.center();
        assert!((c.u - 32.0).abs() <= 24.0 && (c.v - 28.0).abs() <= 24.0);
    }

    #[test]
    fn init_delay_reports_initializing() {
        let s = Sprite::textured(24, 16, 3, 9);
        let mut t = NccTracker::new(TrackerConfig::fixed_template().with_init_delay(3.0));
        t.init(&scene(&s, 50, 40, 0.0), BBox::new(50.0, 40.0, 24.0, 16.0)).unwrap();
        let statuses: Vec<TrackStatus> =
            (1..=40).map(|k| t.track(&scene(&s, 50, 40, k as f64 * 0.1)).unwrap().status).collect();
        let initializing = statuses.iter().take_while(|s| **s == TrackStatus::Initializing).count();
        assert_eq!(initializing, 30);
        assert!(statuses[30..].iter().all(|s| *s == TrackStatus::Ready));
    }

    #[test]
    fn fixed_template_never_changes() {
        let s = Sprite::textured(24, 16, 3, 9);
        let other = Sprite::textured(24, 16, 3, 10);
        let mut t = NccTracker::new(TrackerConfig::fixed_template());
        t.init(&scene(&s, 50, 40, 0.0), BBox::new(50.0, 40.0, 24.0, 16.0)).unwrap();
        let init = t.initial_template().unwrap().to_vec();
        for k in 0..500 {
            let sprite = if k % 7 == 0 { &other } else { &s };
            t.track(&scene(sprite, 50 + (k % 5) as i64, 40, k as f64 * 0.1)).unwrap();
        }
        assert_eq!(t.template_snapshot().unwrap(), init.as_slice());
        assert_eq!(t.template_drift(), Some(0.0));
    }

    #[test]
    fn online_template_drifts_under_occluder() {
        let s = Sprite::textured(24, 16, 3, 9);
        let occ = Sprite::solid(12, 16, [240, 240, 240]);
        let bg = Background::Noise { seed: 3, cell: 3 };
        let mut t = NccTracker::new(TrackerConfig::online_filter(0.1));
        t.init(&scene(&s, 50, 40, 0.0), BBox::new(50.0, 40.0, 24.0, 16.0)).unwrap();
        let mut last = 0.0;
        for k in 1..=50 {
            let f = compose(
                W,
                H,
                &bg,
                &[Placement { sprite: &s, x: 50, y: 40 }, Placement { sprite: &occ, x: 62, y: 40 }],
                k as f64 * 0.1,
            );
            t.track(&f).unwrap();
            let d = t.template_drift().unwrap();
            assert!(d > last, "frame {k}: drift {d} after {last}");
            last = d;
        }
    }

    #[test]
    fn online_template_converges_without_occluder() {
        let s = Sprite::textured(24, 16, 3, 9);
        let f = scene(&s, 50, 40, 0.0);
        let mut t = NccTracker::new(TrackerConfig::online_filter(0.1));
        // init slightly off so the template has something to converge to
        t.init(&f, BBox::new(52.0, 40.0, 24.0, 16.0)).unwrap();
        let mut prev = t.template_snapshot().unwrap().to_vec();
        let mut steps = Vec::new();
        for _ in 0..80 {
            t.track(&f).unwrap();
            let cur = t.template_snapshot().unwrap().to_vec();
            steps.push(cur.iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
            prev = cur;
        }
        assert!(steps[79] < 1e-2 * steps[5].max(1e-12) || steps[79] < 1e-9);
        // geometric decay once the box has settled
        for w in steps[10..].windows(2) {
            assert!(w[1] <= w[0] * 0.9 + 1e-12);
        }
    }

    #[test]
    fn output_is_clamped_inside_frame() {
        let s = Sprite::textured(24, 16, 3, 9);
        let mut t = NccTracker::new(TrackerConfig::fixed_template());
        t.init(&scene(&s, 136, 104, 0.0), BBox::new(136.4, 104.4, 23.5, 15.5)).unwrap();
        let out = t.track(&scene(&s, 136, 104, 0.1)).unwrap();
        assert!(out.bbox.right() <= W as f64 && out.bbox.bottom() <= H as f64);
    }

    #[test]
    fn contract_errors() {
        let s = Sprite::textured(24, 16, 3, 9);
        let f = scene(&s, 50, 40, 0.0);
        let mut t = NccTracker::new(TrackerConfig::fixed_template());
        assert!(matches!(t.track(&f), Err(TrackerError::NotInitialized)));
        assert!(matches!(t.init(&f, BBox::new(-12.0, 40.0, 24.0, 16.0)), Err(TrackerError::BoxOutOfBounds(_))));
        assert!(matches!(t.init(&f, BBox::new(10.0, 10.0, 3.0, 3.0)), Err(TrackerError::DegenerateBox(_))));
        t.init(&f, BBox::new(50.0, 40.0, 24.0, 16.0)).unwrap();
        let small = Frame::filled(80, 60, [0, 0, 0], 0.1);
        assert!(matches!(t.track(&small), Err(TrackerError::FrameSizeChanged { .. })));
    }

    #[test]
    fn deterministic_outputs() {
        let s = Sprite::textured(24, 16, 3, 9);
        let run = || {
            let mut t = NccTracker::new(TrackerConfig::online_filter(0.1));
            t.init(&scene(&s, 50, 40, 0.0), BBox::new(50.0, 40.0, 24.0, 16.0)).unwrap();
            (1..20)
                .map(|k| {
                    let o = t.track(&scene(&s, 50 + k, 40 + k / 2, k as f64 * 0.1)).unwrap();
                    (o.bbox, o.confidence)
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    /// Nearest-neighbour enlargement of a sprite.
    fn enlarged(sprite: &Sprite, factor: f64) -> Sprite {
        let w = (sprite.width as f64 * factor).round() as u32;
        let h = (sprite.height as f64 * factor).round() as u32;
        let pixels = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| {
                let sx = ((x as f64 + 0.5) / factor) as u32;
                let sy = ((y as f64 + 0.5) / factor) as u32;
                sprite.at(sx.min(sprite.width - 1), sy.min(sprite.height - 1))
            })
            .collect();
        Sprite { width: w, height: h, pixels }
    }

    #[test]
    fn scale_search_follows_a_growing_target() {
        let base = Sprite::textured(40, 30, 5, 21);
        let at = |factor: f64, t: f64| {
            let s = enlarged(&base, factor);
            let (x, y) = (80 - s.width as i64 / 2, 60 - s.height as i64 / 2);
            (scene(&s, x, y, t), BBox::new(x as f64, y as f64, s.width as f64, s.height as f64))
        };
        let (first, init) = at(1.0, 0.0);
        let mut scaled = NccTracker::new(TrackerConfig::fixed_template().with_scale_search(1.05));
        let mut fixed = NccTracker::new(TrackerConfig::fixed_template());
        scaled.init(&first, init).unwrap();
        fixed.init(&first, init).unwrap();
        let (mut last_scaled, mut last_fixed, mut truth) = (init, init, init);
        for k in 1..=40 {
            let (frame, gt) = at(1.0 + 0.01 * k as f64, k as f64 * 0.1);
            last_scaled = scaled.track(&frame).unwrap().bbox;
            last_fixed = fixed.track(&frame).unwrap().bbox;
            truth = gt;
        }
        assert_eq!((last_fixed.w, last_fixed.h), (40.0, 30.0));
        assert!((last_scaled.w / truth.w - 1.0).abs() < 0.06, "{last_scaled:?} vs {truth:?}");
        assert!(iou(&last_scaled, &truth) > 0.85);
        assert!(iou(&last_scaled, &truth) > iou(&last_fixed, &truth));
        assert!(scaled.scale().unwrap() > 1.2);
        assert_eq!(scaled.name(), "ncc-scale");
    }

    #[test]
    fn scale_search_keeps_size_on_a_static_target() {
        let sprite = Sprite::textured(40, 30, 5, 8);
        let frame = scene(&sprite, 60, 45, 0.0);
        let init = BBox::new(60.0, 45.0, 40.0, 30.0);
        let mut t = NccTracker::new(TrackerConfig::online_filter(0.1).with_scale_search(1.05));
        t.init(&frame, init).unwrap();
        for k in 1..50 {
            let out = t.track(&scene(&sprite, 60, 45, k as f64 * 0.1)).unwrap();
            assert_eq!(out.bbox, init);
        }
        assert_eq!(t.scale(), Some(1.0));
    }
}
