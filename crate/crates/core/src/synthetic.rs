//! Procedural 2-D test scenes: textured sprites composited over a plain or
//! noisy background. Deterministic for a given seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::BBox;
use crate::tracker::Frame;

/// A small RGB texture.
#[derive(Debug, Clone, PartialEq)]
pub struct Sprite {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

impl Sprite {
    /// Random blocky texture, `cell` pixels per block.
    pub fn textured(width: u32, height: u32, cell: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cell = cell.max(1);
        let (cw, ch) = (width.div_ceil(cell), height.div_ceil(cell));
        let palette: Vec<[u8; 3]> = (0..cw * ch).map(|_| rng.gen()).collect();
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| palette[((y / cell) * cw + x / cell) as usize])
            .collect();
        Self { width, height, pixels }
    }

    pub fn solid(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self { width, height, pixels: vec![rgb; (width * height) as usize] }
    }

    pub fn at(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[(y * self.width + x) as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    Plain([u8; 3]),
    /// Uniform random gray-ish noise in `cell`-sized blocks.
    Noise {
        seed: u64,
        cell: u32,
    },
}

/// A sprite placed with its top-left corner at integer pixel coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Placement<'a> {
    pub sprite: &'a Sprite,
    pub x: i64,
    pub y: i64,
}

impl Placement<'_> {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.x as f64, self.y as f64, self.sprite.width as f64, self.sprite.height as f64)
    }
}

pub fn background_frame(width: u32, height: u32, background: &Background, timestamp: f64) -> Frame {
    match background {
        Background::Plain(rgb) => Frame::filled(width, height, *rgb, timestamp),
        Background::Noise { seed, cell } => {
            let tex = Sprite::textured(width, height, *cell, *seed);
            let data = tex
                .pixels
                .iter()
                // pull toward mid-gray so sprites stand out
                .flat_map(|p| p.map(|c| 64 + c / 2))
                .collect();
            Frame::new(width, height, 3, data, timestamp).expect("size matches")
        }
    }
}

/// Composite sprites in order (later ones on top), clipping at the borders.
pub fn compose(width: u32, height: u32, background: &Background, sprites: &[Placement], timestamp: f64) -> Frame {
    let mut frame = background_frame(width, height, background, timestamp);
    for p in sprites {
        for sy in 0..p.sprite.height {
            let y = p.y + sy as i64;
            if y < 0 || y >= height as i64 {
                continue;
            }
            for sx in 0..p.sprite.width {
                let x = p.x + sx as i64;
                if x < 0 || x >= width as i64 {
                    continue;
                }
                frame.put_rgb(x as u32, y as u32, p.sprite.at(sx, sy));
            }
        }
    }
    frame
}

/// Which part of an [`OccluderScript`] a frame belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionPhase {
    Before,
    During,
    After,
}

/// A textured target swaying over a noisy background; for a middle window
/// of frames a bright patch covers the right half of the target and moves
/// with it. Before and after the window the target looks exactly as
/// it did on frame 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OccluderScript {
    pub width: u32,
    pub height: u32,
    pub background: Background,
    pub target: Sprite,
    pub occluder: Sprite,
    /// Frames before, during and after the occlusion.
    pub phases: [usize; 3],
    /// Horizontal and vertical sway amplitude, px.
    pub sway: (f64, f64),
}

impl OccluderScript {
    pub fn new(seed: u64) -> Self {
        let target = Sprite::textured(24, 16, 3, seed.wrapping_mul(2).wrapping_add(1));
        let occluder = Sprite::solid(12, 16, [235, 235, 235]);
        Self {
            width: 160,
            height: 120,
            background: Background::Noise { seed, cell: 3 },
            target,
            occluder,
            phases: [50, 50, 50],
            sway: (12.0, 6.0),
        }
    }

    pub fn len(&self) -> usize {
        self.phases.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phase(&self, i: usize) -> OcclusionPhase {
        if i < self.phases[0] {
            OcclusionPhase::Before
        } else if i < self.phases[0] + self.phases[1] {
            OcclusionPhase::During
        } else {
            OcclusionPhase::After
        }
    }

    fn position(&self, i: usize) -> (i64, i64) {
        let t = i as f64;
        let x = 68.0 + self.sway.0 * (std::f64::consts::TAU * t / 60.0).sin();
        let y = 52.0 + self.sway.1 * (std::f64::consts::TAU * t / 45.0).sin();
        (x.round() as i64, y.round() as i64)
    }

    /// Ground-truth box of frame `i`.
    pub fn truth(&self, i: usize) -> BBox {
        let (x, y) = self.position(i);
        Placement { sprite: &self.target, x, y }.bbox()
    }

    pub fn frame(&self, i: usize, fps: f64) -> Frame {
        let (x, y) = self.position(i);
        let mut placed = vec![Placement { sprite: &self.target, x, y }];
        if self.phase(i) == OcclusionPhase::During {
            let dx = (self.target.width - self.occluder.width) as i64;
            placed.push(Placement { sprite: &self.occluder, x: x + dx, y });
        }
        compose(self.width, self.height, &self.background, &placed, i as f64 / fps)
    }
}
