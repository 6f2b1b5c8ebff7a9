//! Scenario description and animal motion.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::camera::CameraModel;
use crate::nav::SensorNoise;
use crate::vehicle::{check_dt, wrap_angle, VehicleParams};
use crate::SimError;

/// Named speeds for the qualitative slow / medium / fast labels, m/s.
pub const SPEED_SLOW: f64 = 0.1;
pub const SPEED_MEDIUM: f64 = 0.5;
pub const SPEED_FAST: f64 = 1.5;

/// Time constant with which a dart's extra velocity dies away, s.
pub const DART_DECAY_S: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MotionModel {
    ConstantSwim {
        speed: f64,
    },
    /// Swim for `move_s`, hold still for `pause_s`, repeat. Starts moving.
    StopAndGo {
        move_s: f64,
        pause_s: f64,
        speed: f64,
    },
    /// Constant swim plus Poisson-timed horizontal impulses of `impulse` m/s.
    Darting {
        speed: f64,
        rate: f64,
        impulse: f64,
    },
    /// Walks on the seafloor.
    Crawl {
        speed: f64,
    },
}

impl MotionModel {
    pub fn speed(&self) -> f64 {
        match *self {
            MotionModel::ConstantSwim { speed }
            | MotionModel::StopAndGo { speed, .. }
            | MotionModel::Darting { speed, .. }
            | MotionModel::Crawl { speed } => speed,
        }
    }

    fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            MotionModel::ConstantSwim { speed } | MotionModel::Crawl { speed } => speed >= 0.0,
            MotionModel::StopAndGo { move_s, pause_s, speed } => {
                speed >= 0.0 && move_s >= 0.0 && pause_s >= 0.0 && move_s + pause_s > 0.0
            }
            MotionModel::Darting { speed, rate, impulse } => speed >= 0.0 && rate >= 0.0 && impulse >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid motion parameters {self:?}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionConfig {
    #[serde(flatten)]
    pub model: MotionModel,
    /// Heading random walk, rad/sqrt(s).
    #[serde(default)]
    pub turn_noise: f64,
}

impl MotionConfig {
    pub fn new(model: MotionModel) -> Self {
        Self { model, turn_noise: 0.0 }
    }

    pub fn with_turn_noise(mut self, sigma: f64) -> Self {
        self.turn_noise = sigma;
        self
    }
}

/// Axis-aligned box the animals live in. `z` is depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldBounds {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl WorldBounds {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - 1e-9 && p[i] <= self.max[i] + 1e-9)
    }
}

/// Geometry the animal steppers need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terrain {
    pub bounds: WorldBounds,
    pub seafloor_depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnimalState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Swim direction, clockwise from +x (north) toward +y (east).
    pub heading: f64,
    /// Time since the motion started, for duty-cycled models.
    pub clock: f64,
    /// Extra velocity left over from darts.
    pub dart: Vector3<f64>,
}

impl AnimalState {
    pub fn new(position: Vector3<f64>, heading: f64) -> Self {
        Self { position, velocity: Vector3::zeros(), heading, clock: 0.0, dart: Vector3::zeros() }
    }

    pub fn altitude(&self, seafloor_depth: f64) -> f64 {
        seafloor_depth - self.position.z
    }
}

/// Moving time accumulated by a stop-and-go cycle over `[0, t]`.
pub fn stop_and_go_moving_time(t: f64, move_s: f64, pause_s: f64) -> f64 {
    let period = move_s + pause_s;
    let cycles = (t / period).floor();
    cycles * move_s + (t - cycles * period).min(move_s)
}

fn reflect_axis(p: &mut f64, lo: f64, hi: f64) -> bool {
    if *p < lo {
        *p = (2.0 * lo - *p).min(hi);
        true
    } else if *p > hi {
        *p = (2.0 * hi - *p).max(lo);
        true
    } else {
        false
    }
}

/// Advance an animal by `dt`. Walls reflect the animal back into the world.
pub fn step_animal<R: Rng + ?Sized>(
    state: &AnimalState,
    motion: &MotionConfig,
    terrain: &Terrain,
    dt: f64,
    rng: &mut R,
) -> Result<AnimalState, SimError> {
    check_dt(dt)?;
    let mut next = *state;
    if motion.turn_noise > 0.0 {
        let n: f64 = rng.sample(StandardNormal);
        next.heading = wrap_angle(next.heading + motion.turn_noise * dt.sqrt() * n);
    }
    let dir = Vector3::new(next.heading.cos(), next.heading.sin(), 0.0);

    let distance = match motion.model {
        MotionModel::ConstantSwim { speed } | MotionModel::Crawl { speed } => speed * dt,
        MotionModel::Darting { speed, .. } => speed * dt,
        MotionModel::StopAndGo { move_s, pause_s, speed } => {
            speed
                * (stop_and_go_moving_time(state.clock + dt, move_s, pause_s)
                    - stop_and_go_moving_time(state.clock, move_s, pause_s))
        }
    };

    let mut displacement = dir * distance;
    if let MotionModel::Darting { rate, impulse, .. } = motion.model {
        // the old dart velocity decays exactly over the step
        let decay = (-dt / DART_DECAY_S).exp();
        displacement += state.dart * DART_DECAY_S * (1.0 - decay);
        next.dart = state.dart * decay;
        if rate > 0.0 {
            let n = Poisson::new(rate * dt).expect("positive mean").sample(rng) as u64;
            for _ in 0..n {
                let a = rng.gen_range(-PI..PI);
                next.dart += Vector3::new(a.cos(), a.sin(), 0.0) * impulse;
            }
        }
    }
    next.position += displacement;
    next.clock = state.clock + dt;

    let b = &terrain.bounds;
    if reflect_axis(&mut next.position.x, b.min.x, b.max.x) {
        next.heading = wrap_angle(PI - next.heading);
        next.dart.x = -next.dart.x;
    }
    if reflect_axis(&mut next.position.y, b.min.y, b.max.y) {
        next.heading = wrap_angle(-next.heading);
        next.dart.y = -next.dart.y;
    }
    let floor = terrain.seafloor_depth.min(b.max.z);
    if let MotionModel::Crawl { .. } = motion.model {
        next.position.z = terrain.seafloor_depth;
    } else {
        next.position.z = next.position.z.clamp(b.min.z, floor);
    }
    next.velocity = (next.position - state.position) / dt;
    Ok(next)
}

/// Physical size of an animal: length along its heading, width across it,
/// height vertically. Meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

/// How an animal looks: a blocky random texture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Appearance {
    pub seed: u64,
    /// Texture resolution, pixels.
    pub texture: [u32; 2],
    /// Block size inside the texture, pixels.
    pub cell: u32,
}

impl Default for Appearance {
    fn default() -> Self {
        Self { seed: 1, texture: [48, 24], cell: 6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnimalSpec {
    pub position: Vector3<f64>,
    #[serde(default)]
    pub heading: f64,
    pub extent: Extent,
    #[serde(default)]
    pub appearance: Appearance,
    pub motion: MotionConfig,
}

impl AnimalSpec {
    pub fn initial_state(&self) -> AnimalState {
        AnimalState::new(self.position, self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaterParams {
    /// Per-channel attenuation (r, g, b), 1/m. Red is absorbed fastest.
    pub beta: [f64; 3],
    /// Color of infinitely deep water, 0..255.
    pub color: [f64; 3],
    /// Marine snow particles per cubic meter.
    pub snow_density: f64,
    /// Snow is scattered up to this range, m.
    pub snow_range: f64,
}

impl Default for WaterParams {
    fn default() -> Self {
        Self { beta: [0.35, 0.07, 0.03], color: [10.0, 60.0, 90.0], snow_density: 0.0, snow_range: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "style", rename_all = "kebab-case")]
pub enum Seafloor {
    Plain {
        color: [f64; 3],
    },
    Checker {
        a: [f64; 3],
        b: [f64; 3],
        cell_m: f64,
    },
    /// Random gray-brown patches of `cell_m` meters.
    Noise {
        seed: u64,
        cell_m: f64,
        color: [f64; 3],
    },
}

impl Default for Seafloor {
    fn default() -> Self {
        Seafloor::Plain { color: [150.0, 140.0, 110.0] }
    }
}

/// Something that happens to the target at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioEvent {
    /// Move the target instantly by `offset` meters.
    Teleport { t: f64, offset: Vector3<f64> },
}

impl ScenarioEvent {
    pub fn time(&self) -> f64 {
        match *self {
            ScenarioEvent::Teleport { t, .. } => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleSetup {
    pub position: Vector3<f64>,
    #[serde(default)]
    pub heading: f64,
    #[serde(default)]
    pub params: VehicleParams,
    #[serde(default)]
    pub noise: SensorNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    pub duration_s: f64,
    pub frame_rate: f64,
    pub seafloor_depth: f64,
    pub bounds: WorldBounds,
    #[serde(default)]
    pub water: WaterParams,
    #[serde(default)]
    pub seafloor: Seafloor,
    #[serde(default)]
    pub camera: CameraModel,
    pub vehicle: VehicleSetup,
    pub animal: AnimalSpec,
    #[serde(default)]
    pub distractors: Vec<AnimalSpec>,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, SimError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn terrain(&self) -> Terrain {
        Terrain { bounds: self.bounds, seafloor_depth: self.seafloor_depth }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.frame_rate
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.frame_rate).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));
        let [r, g, b] = self.water.beta;
        if !(r >= g && g >= b && b >= 0.0) {
            return bad(format!("attenuation must satisfy beta_r >= beta_g >= beta_b >= 0, got {:?}", self.water.beta));
        }
        if !(self.frame_rate >= 10.0) {
            return bad(format!("frame rate {} Hz is below 10 Hz", self.frame_rate));
        }
        if !(self.duration_s > 0.0) {
            return bad("duration must be positive".into());
        }
        if !(self.seafloor_depth > 0.0) {
            return bad("seafloor depth must be positive".into());
        }
        if self.water.snow_density < 0.0 || self.water.snow_range <= 0.0 {
            return bad("snow density must be >= 0 and range > 0".into());
        }
        self.camera.validate().map_err(SimError::InvalidScenario)?;
        for (i, a) in std::iter::once(&self.animal).chain(&self.distractors).enumerate() {
            let name = if i == 0 { "animal".to_string() } else { format!("distractor {}", i - 1) };
            a.motion.model.validate().map_err(|m| SimError::InvalidScenario(format!("{name}: {m}")))?;
            if a.motion.turn_noise < 0.0 {
                return bad(format!("{name}: negative turn noise"));
            }
            if !self.bounds.contains(&a.position) || a.position.z > self.seafloor_depth {
                return bad(format!("{name} starts outside the world"));
            }
            if !(a.extent.length > 0.0 && a.extent.width > 0.0 && a.extent.height > 0.0) {
                return bad(format!("{name}: extent must be positive"));
            }
        }
        let v = &self.vehicle;
        if v.position.z < 0.0 || v.position.z > self.seafloor_depth {
            return bad("vehicle starts outside the water column".into());
        }
        if v.params.tau_s <= 0.0 || v.params.v_max.iter().any(|m| *m < 0.0) || v.params.yaw_rate_max < 0.0 {
            return bad("vehicle limits must be non-negative and tau positive".into());
        }
        Ok(())
    }

    /// Plain-background midwater scene: a textured fish swimming slowly in
    /// open water, centered in view of a vehicle hovering behind it.
    pub fn reference_midwater() -> Scenario {
        let camera = CameraModel::default();
        let range = 6.0;
        let drop = range * camera.tilt_rad.tan();
        Scenario {
            id: "midwater-constant-swim".into(),
            seed: 11,
            duration_s: 60.0,
            frame_rate: 10.0,
            seafloor_depth: 60.0,
            bounds: WorldBounds { min: Vector3::new(-500.0, -500.0, 0.0), max: Vector3::new(500.0, 500.0, 60.0) },
            water: WaterParams::default(),
            seafloor: Seafloor::default(),
            camera,
            vehicle: VehicleSetup {
                position: Vector3::new(0.0, 0.0, 10.0),
                heading: 0.0,
                params: VehicleParams::default(),
                noise: SensorNoise::typical(),
            },
            animal: AnimalSpec {
                position: Vector3::new(range, 0.0, 10.0 + drop),
                heading: 0.0,
                extent: Extent { length: 0.8, width: 0.6, height: 0.5 },
                appearance: Appearance { seed: 5, texture: [48, 24], cell: 6 },
                motion: MotionConfig::new(MotionModel::ConstantSwim { speed: 0.2 }).with_turn_noise(0.02),
            },
            distractors: Vec::new(),
            events: Vec::new(),
        }
    }

    /// The reference scene with the target jumping far out of view mid-episode.
    pub fn teleport() -> Scenario {
        let mut s = Self::reference_midwater();
        s.id = "midwater-teleport".into();
        s.duration_s = 40.0;
        s.events.push(ScenarioEvent::Teleport { t: 15.0, offset: Vector3::new(0.0, 40.0, 0.0) });
        s
    }
}
