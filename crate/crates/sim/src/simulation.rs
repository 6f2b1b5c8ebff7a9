use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reefloop_core::synthetic::Sprite;
use reefloop_core::tracker::Frame;
use reefloop_core::BBox;

use crate::camera::{gt_bbox, CameraPose};
use crate::nav::{sense, SensorPacket};
use crate::render::{render_frame, RenderInput, SpriteInstance};
use crate::vehicle::{step_vehicle, ControlCommand, VehicleState};
use crate::world::{step_animal, AnimalSpec, AnimalState, Scenario, ScenarioEvent};
use crate::SimError;

// independent random streams so that, e.g., rendering extra frames never
// changes how the animals move
const MOTION_STREAM: u64 = 1 << 62;
const SENSOR_STREAM: u64 = 1 << 61;

/// Slowest control loop the servo is designed for.
pub const MIN_TICK_HZ: f64 = 9.0;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn texture(spec: &AnimalSpec) -> Sprite {
    let a = &spec.appearance;
    Sprite::textured(a.texture[0].max(1), a.texture[1].max(1), a.cell, a.seed)
}

/// The synthetic world: one target, optional distractors and the vehicle,
/// advanced in fixed ticks of `1 / frame_rate`.
pub struct Simulation {
    scenario: Scenario,
    tick: u64,
    vehicle: VehicleState,
    animal: AnimalState,
    distractors: Vec<AnimalState>,
    textures: Vec<Sprite>,
    motion_rng: ChaCha8Rng,
    sensor_rng: ChaCha8Rng,
    events: Vec<ScenarioEvent>,
    next_event: usize,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        Ok(Self::build(scenario))
    }

    /// Run a valid scenario at a different tick rate. The control loop may
    /// tick slower than the 10 Hz a recorded sequence needs, down to 9 Hz.
    pub fn with_tick_rate(mut scenario: Scenario, tick_hz: f64) -> Result<Self, SimError> {
        scenario.validate()?;
        if !(tick_hz >= MIN_TICK_HZ) {
            return Err(SimError::InvalidScenario(format!("tick rate {tick_hz} Hz is below {MIN_TICK_HZ} Hz")));
        }
        scenario.frame_rate = tick_hz;
        Ok(Self::build(scenario))
    }

    fn build(scenario: Scenario) -> Self {
        let mut events = scenario.events.clone();
        events.sort_by(|a, b| a.time().total_cmp(&b.time()));
        let textures = std::iter::once(&scenario.animal).chain(&scenario.distractors).map(texture).collect();
        Self {
            tick: 0,
            vehicle: VehicleState::at_rest(scenario.vehicle.position, scenario.vehicle.heading),
            animal: scenario.animal.initial_state(),
            distractors: scenario.distractors.iter().map(AnimalSpec::initial_state).collect(),
            textures,
            motion_rng: stream(scenario.seed, MOTION_STREAM),
            sensor_rng: stream(scenario.seed, SENSOR_STREAM),
            events,
            next_event: 0,
            scenario,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.scenario.dt()
    }

    pub fn is_finished(&self) -> bool {
        self.tick as usize >= self.scenario.frame_count()
    }

    pub fn vehicle(&self) -> &VehicleState {
        &self.vehicle
    }

    pub fn animal(&self) -> &AnimalState {
        &self.animal
    }

    pub fn distractors(&self) -> &[AnimalState] {
        &self.distractors
    }

    pub fn camera_pose(&self) -> CameraPose {
        CameraPose::from(&self.vehicle)
    }

    pub fn altitude(&self) -> f64 {
        self.vehicle.altitude(self.scenario.seafloor_depth)
    }

    /// Advance everything by one tick under `cmd`.
    pub fn step(&mut self, cmd: &ControlCommand) -> Result<(), SimError> {
        let dt = self.scenario.dt();
        let terrain = self.scenario.terrain();
        self.vehicle =
            step_vehicle(&self.vehicle, cmd, &self.scenario.vehicle.params, self.scenario.seafloor_depth, dt)?;
        self.animal = step_animal(&self.animal, &self.scenario.animal.motion, &terrain, dt, &mut self.motion_rng)?;
        for (state, spec) in self.distractors.iter_mut().zip(&self.scenario.distractors) {
            *state = step_animal(state, &spec.motion, &terrain, dt, &mut self.motion_rng)?;
        }
        self.tick += 1;
        let now = self.time();
        while let Some(e) = self.events.get(self.next_event) {
            if e.time() > now + 1e-9 {
                break;
            }
            match *e {
                ScenarioEvent::Teleport { offset, .. } => {
                    self.animal.position += offset;
                    let b = &self.scenario.bounds;
                    for i in 0..3 {
                        self.animal.position[i] = self.animal.position[i].clamp(b.min[i], b.max[i]);
                    }
                    self.animal.position.z = self.animal.position.z.min(self.scenario.seafloor_depth);
                }
            }
            self.next_event += 1;
        }
        Ok(())
    }

    /// Sensor readings for the current state.
    pub fn sense(&mut self) -> SensorPacket {
        sense(
            &self.vehicle,
            self.scenario.seafloor_depth,
            &self.scenario.vehicle.noise,
            self.time(),
            &mut self.sensor_rng,
        )
    }

    /// Ground-truth box of the target in the current view.
    pub fn gt_bbox(&self) -> Option<BBox> {
        gt_bbox(&self.scenario.camera, &self.camera_pose(), &self.animal, &self.scenario.animal.extent)
    }

    /// Render the current view. Snow is seeded by the scenario seed and the
    /// tick, so a frame depends only on the state it shows.
    pub fn render(&self) -> Frame {
        let pose = self.camera_pose();
        let states = std::iter::once(&self.animal).chain(&self.distractors);
        let specs = std::iter::once(&self.scenario.animal).chain(&self.scenario.distractors);
        let sprites: Vec<SpriteInstance> = states
            .zip(specs)
            .zip(&self.textures)
            .map(|((state, spec), texture)| SpriteInstance { state, extent: &spec.extent, texture })
            .collect();
        let input = RenderInput {
            camera: &self.scenario.camera,
            pose: &pose,
            water: &self.scenario.water,
            seafloor: &self.scenario.seafloor,
            seafloor_depth: self.scenario.seafloor_depth,
            sprites: &sprites,
            timestamp: self.time(),
        };
        render_frame(&input, &mut stream(self.scenario.seed, self.tick))
    }
}
