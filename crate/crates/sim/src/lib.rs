//! Closed-loop simulation for tracking-based visual servoing: a synthetic
//! underwater scene with a moving animal, a four-axis vehicle with DVL,
//! compass and depth sensors, dead reckoning, and the servo controller that
//! steers the vehicle from tracker boxes.

pub mod camera;
pub mod nav;
pub mod render;
pub mod servo;
mod simulation;
pub mod vehicle;
pub mod world;

use thiserror::Error;

pub use camera::{gt_bbox, CameraModel, CameraPose};
pub use nav::{dead_reckon, sense, NavEstimate, SensorNoise, SensorPacket};
pub use servo::{
    ModeTransition, Observation, OperatorAction, ServoConfig, ServoController, ServoInput, ServoOutput, TrackerMode,
};
pub use simulation::{Simulation, MIN_TICK_HZ};
pub use vehicle::{step_vehicle, ControlCommand, VehicleParams, VehicleState};
pub use world::{step_animal, AnimalState, MotionConfig, MotionModel, Scenario};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("time step {0} s outside (0, 0.2]")]
    InvalidStep(f64),
    #[error("sensor timestamp {next} does not follow {previous}")]
    NonMonotoneTimestamp { previous: f64, next: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid servo configuration: {0}")]
    InvalidServo(String),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
}
