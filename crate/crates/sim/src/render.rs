//! Frame synthesis: seafloor plane, billboard sprites, per-channel water
//! attenuation and marine snow.

use rand::Rng;
use reefloop_core::synthetic::Sprite;
use reefloop_core::tracker::Frame;

use crate::camera::{projected_hull, CameraModel, CameraPose};
use crate::world::{AnimalState, Extent, Seafloor, WaterParams};

/// Mix a surface color toward the water color over `range` meters.
pub fn attenuate(color: [f64; 3], water: &WaterParams, range: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for c in 0..3 {
        let t = (-water.beta[c] * range).exp();
        out[c] = color[c] * t + water.color[c] * (1.0 - t);
    }
    out
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Color of the seafloor at horizontal position (x, y).
pub fn seafloor_color(floor: &Seafloor, x: f64, y: f64) -> [f64; 3] {
    match *floor {
        Seafloor::Plain { color } => color,
        Seafloor::Checker { a, b, cell_m } => {
            let (i, j) = ((x / cell_m).floor() as i64, (y / cell_m).floor() as i64);
            if (i + j).rem_euclid(2) == 0 {
                a
            } else {
                b
            }
        }
        Seafloor::Noise { seed, cell_m, color } => {
            let (i, j) = ((x / cell_m).floor() as i64, (y / cell_m).floor() as i64);
            let h = splitmix(seed ^ splitmix(i as u64 ^ splitmix(j as u64)));
            let k = 0.55 + 0.9 * (h % 1024) as f64 / 1023.0;
            color.map(|c| c * k)
        }
    }
}

/// One animal to draw.
pub struct SpriteInstance<'a> {
    pub state: &'a AnimalState,
    pub extent: &'a Extent,
    pub texture: &'a Sprite,
}

pub struct RenderInput<'a> {
    pub camera: &'a CameraModel,
    pub pose: &'a CameraPose,
    pub water: &'a WaterParams,
    pub seafloor: &'a Seafloor,
    pub seafloor_depth: f64,
    pub sprites: &'a [SpriteInstance<'a>],
    pub timestamp: f64,
}

/// Render one RGB frame. Snow positions come from `rng`; everything else is
/// a pure function of the inputs.
pub fn render_frame<R: Rng + ?Sized>(input: &RenderInput, rng: &mut R) -> Frame {
    let cam = input.camera;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut rgb = vec![[0.0f64; 3]; w * h];
    let mut depth = vec![f64::INFINITY; w * h];

    for v in 0..h {
        for u in 0..w {
            let d = cam.ray(input.pose, u as f64 + 0.5, v as f64 + 0.5);
            let idx = v * w + u;
            if d.z > 1e-9 {
                let t = (input.seafloor_depth - input.pose.position.z) / d.z;
                let hit = input.pose.position + d * t;
                let range = t * d.norm();
                rgb[idx] = attenuate(seafloor_color(input.seafloor, hit.x, hit.y), input.water, range);
                depth[idx] = range;
            } else {
                rgb[idx] = input.water.color;
            }
        }
    }

    // far to near so nearer animals cover farther ones
    let mut order: Vec<(f64, usize)> =
        input.sprites.iter().enumerate().map(|(i, s)| ((s.state.position - input.pose.position).norm(), i)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (range, i) in order {
        let s = &input.sprites[i];
        let Some(hull) = projected_hull(cam, input.pose, s.state, s.extent) else {
            continue;
        };
        let u0 = hull.x.floor().max(0.0) as usize;
        let v0 = hull.y.floor().max(0.0) as usize;
        let u1 = (hull.right().ceil().max(0.0) as usize).min(w);
        let v1 = (hull.bottom().ceil().max(0.0) as usize).min(h);
        for v in v0..v1 {
            let pv = v as f64 + 0.5;
            if pv < hull.y || pv >= hull.bottom() {
                continue;
            }
            let ty = (((pv - hull.y) / hull.h * s.texture.height as f64) as u32).min(s.texture.height - 1);
            for u in u0..u1 {
                let pu = u as f64 + 0.5;
                if pu < hull.x || pu >= hull.right() {
                    continue;
                }
                let tx = (((pu - hull.x) / hull.w * s.texture.width as f64) as u32).min(s.texture.width - 1);
                let texel = s.texture.at(tx, ty).map(f64::from);
                rgb[v * w + u] = attenuate(texel, input.water, range);
                depth[v * w + u] = range;
            }
        }
    }

    let n_snow = snow_count(cam, input.water);
    for _ in 0..n_snow {
        let u = rng.gen_range(0.0..w as f64);
        let v = rng.gen_range(0.0..h as f64);
        let z = (input.water.snow_range * rng.gen::<f64>().cbrt()).max(0.2);
        let size = if z < 1.5 {
            3
        } else if z < 4.0 {
            2
        } else {
            1
        };
        let color = attenuate([235.0, 235.0, 225.0], input.water, z);
        let (u, v) = (u as usize, v as usize);
        for dv in 0..size {
            for du in 0..size {
                let (x, y) = (u + du, v + dv);
                if x < w && y < h && z < depth[y * w + x] {
                    rgb[y * w + x] = color;
                }
            }
        }
    }

    let data = rgb.iter().flat_map(|p| p.map(|c| c.round().clamp(0.0, 255.0) as u8)).collect();
    Frame::new(cam.width, cam.height, 3, data, input.timestamp).expect("buffer matches size")
}

/// Number of snow particles in the view frustum out to the snow range.
pub fn snow_count(camera: &CameraModel, water: &WaterParams) -> usize {
    let r = water.snow_range;
    let volume = (camera.width as f64 / camera.focal_px) * (camera.height as f64 / camera.focal_px) * r.powi(3) / 3.0;
    (water.snow_density * volume).round() as usize
}
