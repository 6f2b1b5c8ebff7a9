use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reefloop_sim::servo::compute_errors;
use reefloop_sim::world::{AnimalSpec, Appearance, Extent, WorldBounds};
use reefloop_sim::{
    ControlCommand, MotionConfig, MotionModel, Observation, OperatorAction, Scenario, SensorNoise, ServoConfig,
    ServoController, ServoInput, Simulation, TrackerMode,
};

/// Run a perfect-tracker loop: the observation is the ground-truth box.
struct Loop {
    sim: Simulation,
    servo: ServoController,
}

impl Loop {
    fn new(scenario: Scenario, config: ServoConfig) -> Self {
        let sim = Simulation::new(scenario).unwrap();
        let mut servo = ServoController::new(config).unwrap();
        let init = sim.gt_bbox().expect("target visible at start");
        servo.operator(OperatorAction::InitBox { bbox: init }, 0.0);
        Self { sim, servo }
    }

    fn dims(&self) -> (u32, u32) {
        let c = &self.sim.scenario().camera;
        (c.width, c.height)
    }

    fn tick(&mut self, operator: Option<ControlCommand>) -> reefloop_sim::ServoOutput {
        let packet = self.sim.sense();
        let obs = self.sim.gt_bbox().map(|bbox| Observation { bbox, confidence: 1.0, ready: true });
        let input = ServoInput { observation: obs, frame_dims: self.dims(), altitude: packet.dvl_altitude, operator };
        let dt = self.sim.scenario().dt();
        let out = self.servo.step(&input, dt, self.sim.time());
        self.sim.step(&out.command).unwrap();
        out
    }
}

fn static_target_offset(offset_frac: f64) -> Scenario {
    let mut s = Scenario::reference_midwater();
    s.animal.motion = MotionConfig::new(MotionModel::ConstantSwim { speed: 0.0 });
    s.vehicle.noise = SensorNoise::default();
    // yaw the vehicle until the target sits `offset_frac` of the width off center
    let e_x = |s: &Scenario| {
        let sim = Simulation::new(s.clone()).unwrap();
        compute_errors(&sim.gt_bbox().unwrap(), (s.camera.width, s.camera.height), 1.0).e_x
    };
    let (mut lo, mut hi) = (-0.8f64, 0.8f64);
    for _ in 0..60 {
        s.vehicle.heading = 0.5 * (lo + hi);
        // yawing right moves the target left in the image
        if e_x(&s) > offset_frac {
            lo = s.vehicle.heading;
        } else {
            hi = s.vehicle.heading;
        }
    }
    s
}

#[test]
fn static_target_is_centered_within_ten_seconds() {
    for sign in [1.0, -1.0] {
        let scenario = static_target_offset(0.3 * sign);
        let mut l = Loop::new(scenario, ServoConfig::default());
        let e0 = compute_errors(&l.sim.gt_bbox().unwrap(), l.dims(), 1.0);
        assert!((e0.e_x.abs() - 0.3).abs() < 1e-6, "start e_x {}", e0.e_x);
        let mut centered_at = None;
        for k in 0..200 {
            l.tick(None);
            let e = compute_errors(&l.sim.gt_bbox().unwrap(), l.dims(), 1.0);
            if e.e_x.abs() <= 0.05 && centered_at.is_none() {
                centered_at = Some(k as f64 * 0.1);
            }
            if k >= 100 {
                assert!(e.e_x.abs() <= 0.05, "t={} e_x={}", k as f64 * 0.1, e.e_x);
            }
        }
        assert!(centered_at.unwrap() <= 10.0);
        assert_eq!(l.servo.mode(), TrackerMode::Tracking);
    }
}

#[test]
fn yaw_sign_reduces_horizontal_error() {
    let scenario = static_target_offset(-0.2);
    let mut l = Loop::new(scenario, ServoConfig::default());
    let e = |l: &Loop| compute_errors(&l.sim.gt_bbox().unwrap(), l.dims(), 1.0).e_x;
    let start = e(&l);
    assert!(start < 0.0);
    let first = l.tick(None);
    let first = l.tick(None).command.yaw.min(first.command.yaw);
    assert!(first < 0.0, "target left must yaw left");
    for _ in 0..10 {
        l.tick(None);
    }
    assert!(e(&l).abs() < start.abs());
}

#[test]
fn moving_target_keeps_width() {
    let mut l = Loop::new(Scenario::reference_midwater(), ServoConfig::default());
    let reference = l.servo.reference_width().unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..600 {
        l.tick(None);
        let b = l.sim.gt_bbox().expect("target stays in view");
        if k > 100 {
            worst = worst.max(((b.w - reference) / reference).abs());
        }
    }
    assert_eq!(l.servo.mode(), TrackerMode::Tracking);
    assert!(worst < 0.25, "width error {worst}");
}

/// A crawler on the floor ahead of a vehicle that starts low, with random
/// operator interventions pushing down.
fn floor_episode(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.gen_range(6.0..30.0);
    let altitude = rng.gen_range(0.8..4.0);
    let mut s = Scenario::reference_midwater();
    s.id = format!("floor-{seed}");
    s.seed = seed;
    s.seafloor_depth = depth;
    s.bounds = WorldBounds { min: Vector3::new(-300.0, -300.0, 0.0), max: Vector3::new(300.0, 300.0, depth) };
    s.vehicle.position = Vector3::new(0.0, 0.0, depth - altitude);
    s.vehicle.heading = rng.gen_range(-0.2..0.2);
    let ahead = altitude / s.camera.tilt_rad.tan() + rng.gen_range(-0.5..1.5);
    s.animal = AnimalSpec {
        position: Vector3::new(ahead.max(1.0), rng.gen_range(-0.3..0.3), depth),
        heading: rng.gen_range(-3.0..3.0),
        extent: Extent { length: 0.4, width: 0.3, height: 0.15 },
        appearance: Appearance::default(),
        motion: MotionConfig::new(MotionModel::Crawl { speed: rng.gen_range(0.0..0.3) }).with_turn_noise(0.3),
    };
    s.duration_s = 60.0;
    s
}

#[test]
fn altitude_floor_holds_over_randomized_episodes() {
    let mut lowest = f64::INFINITY;
    let mut limited_ticks = 0;
    let mut ran = 0;
    for seed in 0..100u64 {
        let scenario = floor_episode(seed);
        let sim = Simulation::new(scenario.clone()).unwrap();
        if sim.gt_bbox().is_none_or(|b| b.area() < 16.0) {
            continue;
        }
        ran += 1;
        let config = ServoConfig::default();
        let floor = config.altitude_floor;
        let mut l = Loop::new(scenario, config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        let mut stick = None;
        for _ in 0..600 {
            // occasionally the operator grabs the stick and pushes down
            if rng.gen_bool(0.02) {
                if stick.is_none() {
                    l.servo.operator(OperatorAction::Override, l.sim.time());
                    stick = Some(ControlCommand::new(rng.gen_range(-1.0..1.0), 0.0, -1.0, rng.gen_range(-1.0..1.0)));
                } else {
                    l.servo.operator(OperatorAction::Release, l.sim.time());
                    stick = None;
                }
            }
            if l.servo.mode() == TrackerMode::Lost {
                if let Some(b) = l.sim.gt_bbox().filter(|b| b.area() >= 16.0) {
                    l.servo.operator(OperatorAction::Reinit { bbox: b }, l.sim.time());
                }
            }
            let out = l.tick(stick);
            for c in out.command.components() {
                assert!((-1.0..=1.0).contains(&c));
            }
            limited_ticks += out.floor_limited as usize;
            let alt = l.sim.altitude();
            lowest = lowest.min(alt);
            assert!(alt >= floor - 0.05, "seed {seed}: altitude {alt} at t={}", l.sim.time());
        }
    }
    assert!(ran >= 90, "only {ran} episodes started with a visible target");
    assert!(limited_ticks > 0, "floor never engaged");
    assert!(lowest < 1.0, "episodes never came near the floor (lowest {lowest})");
}

#[test]
fn servo_step_is_fast() {
    let scenario = static_target_offset(0.2);
    let sim = Simulation::new(scenario).unwrap();
    let mut servo = ServoController::new(ServoConfig::default()).unwrap();
    let b = sim.gt_bbox().unwrap();
    servo.operator(OperatorAction::InitBox { bbox: b }, 0.0);
    let input = ServoInput {
        observation: Some(Observation { bbox: b, confidence: 0.9, ready: true }),
        frame_dims: (320, 240),
        altitude: 5.0,
        operator: None,
    };
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let start = Instant::now();
        let out = servo.step(&input, 0.1, k as f64 * 0.1);
        worst = worst.max(start.elapsed().as_secs_f64() * 1e3);
        assert!(out.command.components().iter().all(|c| c.abs() <= 1.0));
    }
    assert!(worst < 5.0, "slowest step {worst} ms");
}
