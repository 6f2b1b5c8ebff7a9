//! Four-axis vehicle: surge, sway, heave and yaw with first-order velocity
//! response. Roll and pitch stay at zero.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::SimError;

/// Largest integration step accepted by the steppers, in seconds.
pub const MAX_DT: f64 = 0.2;

pub(crate) fn check_dt(dt: f64) -> Result<(), SimError> {
    if dt > 0.0 && dt <= MAX_DT + 1e-12 {
        Ok(())
    } else {
        Err(SimError::InvalidStep(dt))
    }
}

/// Normalized velocity setpoints in `[-1, 1]`.
///
/// `heave` is positive upward (ascend), unlike the world `z` axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub surge: f64,
    pub sway: f64,
    pub heave: f64,
    pub yaw: f64,
}

impl ControlCommand {
    pub const ZERO: ControlCommand = ControlCommand { surge: 0.0, sway: 0.0, heave: 0.0, yaw: 0.0 };

    pub fn new(surge: f64, sway: f64, heave: f64, yaw: f64) -> Self {
        Self { surge, sway, heave, yaw }.clamped()
    }

    /// Each component clamped to `[-1, 1]`; NaN becomes 0.
    pub fn clamped(self) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        Self { surge: c(self.surge), sway: c(self.sway), heave: c(self.heave), yaw: c(self.yaw) }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.surge, self.sway, self.heave, self.yaw]
    }

    pub fn is_zero(&self) -> bool {
        self.components().iter().all(|c| *c == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// Top speed per translational axis (surge, sway, heave), m/s.
    pub v_max: [f64; 3],
    /// Top yaw rate, rad/s.
    pub yaw_rate_max: f64,
    /// Velocity time constant, s.
    pub tau_s: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { v_max: [1.0, 1.0, 1.0], yaw_rate_max: 0.6, tau_s: 0.8 }
    }
}

/// Truth state. `velocity` is body frame: (surge u, sway v, heave w) with
/// `w` positive down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vector3<f64>,
    pub heading: f64,
    pub velocity: Vector3<f64>,
    pub yaw_rate: f64,
}

impl VehicleState {
    pub fn at_rest(position: Vector3<f64>, heading: f64) -> Self {
        Self { position, heading, velocity: Vector3::zeros(), yaw_rate: 0.0 }
    }

    pub fn depth(&self) -> f64 {
        self.position.z
    }

    pub fn altitude(&self, seafloor_depth: f64) -> f64 {
        seafloor_depth - self.position.z
    }

    /// Body-frame horizontal velocity rotated into the world frame, plus heave.
    pub fn world_velocity(&self) -> Vector3<f64> {
        body_to_world(self.heading, &self.velocity)
    }
}

/// Rotate a body-frame vector by heading about the down axis.
pub fn body_to_world(heading: f64, v: &Vector3<f64>) -> Vector3<f64> {
    let (s, c) = heading.sin_cos();
    Vector3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

pub fn world_to_body(heading: f64, v: &Vector3<f64>) -> Vector3<f64> {
    let (s, c) = heading.sin_cos();
    Vector3::new(c * v.x + s * v.y, -s * v.x + c * v.y, v.z)
}

/// Map an angle into `(-pi, pi]`, leaving in-range values untouched.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -std::f64::consts::PI && a <= std::f64::consts::PI {
        return a;
    }
    let w = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if w <= -std::f64::consts::PI {
        w + std::f64::consts::TAU
    } else {
        w
    }
}

/// Advance the vehicle by `dt`.
///
/// Velocities follow the exact first-order step toward their setpoints, then
/// heading integrates the new yaw rate and position the new velocity, so a
/// dead-reckoner fed the post-step velocity and heading reproduces the truth.
pub fn step_vehicle(
    state: &VehicleState,
    cmd: &ControlCommand,
    params: &VehicleParams,
    seafloor_depth: f64,
    dt: f64,
) -> Result<VehicleState, SimError> {
    check_dt(dt)?;
    let cmd = cmd.clamped();
    let target = Vector3::new(cmd.surge * params.v_max[0], cmd.sway * params.v_max[1], -cmd.heave * params.v_max[2]);
    let target_r = cmd.yaw * params.yaw_rate_max;
    let k = 1.0 - (-dt / params.tau_s).exp();

    let mut next = *state;
    next.velocity += (target - state.velocity) * k;
    next.yaw_rate += (target_r - state.yaw_rate) * k;
    next.heading = wrap_angle(state.heading + next.yaw_rate * dt);
    next.position += body_to_world(next.heading, &next.velocity) * dt;
    if next.position.z < 0.0 {
        next.position.z = 0.0;
        next.velocity.z = next.velocity.z.max(0.0);
    } else if next.position.z > seafloor_depth {
        next.position.z = seafloor_depth;
        next.velocity.z = next.velocity.z.min(0.0);
    }
    Ok(next)
}
