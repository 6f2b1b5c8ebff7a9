//! DVL, compass and depth sensor models and the dead-reckoning estimator.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::vehicle::{body_to_world, wrap_angle, VehicleState};
use crate::SimError;

/// Per-channel Gaussian noise (one sigma) and the constant compass bias.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoise {
    /// m/s, each body axis.
    pub velocity_sigma: f64,
    pub depth_sigma: f64,
    pub altitude_sigma: f64,
    /// rad.
    pub heading_sigma: f64,
    /// rad, added to every compass reading.
    pub heading_bias: f64,
}

impl SensorNoise {
    /// Small values in the range of a commercial DVL and fluxgate compass.
    pub fn typical() -> Self {
        Self {
            velocity_sigma: 0.01,
            depth_sigma: 0.01,
            altitude_sigma: 0.02,
            heading_sigma: 0.5f64.to_radians(),
            heading_bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorPacket {
    pub timestamp: f64,
    /// Body frame (surge, sway, heave down), m/s.
    pub dvl_velocity: Vector3<f64>,
    pub dvl_altitude: f64,
    pub compass_heading: f64,
    pub depth: f64,
}

fn gauss<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    let n: f64 = rng.sample(StandardNormal);
    n * sigma
}

/// Read all sensors at time `t`.
pub fn sense<R: Rng + ?Sized>(
    state: &VehicleState,
    seafloor_depth: f64,
    noise: &SensorNoise,
    t: f64,
    rng: &mut R,
) -> SensorPacket {
    let dvl_velocity = state.velocity
        + Vector3::new(
            gauss(rng, noise.velocity_sigma),
            gauss(rng, noise.velocity_sigma),
            gauss(rng, noise.velocity_sigma),
        );
    let depth = (state.position.z + gauss(rng, noise.depth_sigma)).max(0.0);
    let dvl_altitude = (seafloor_depth - state.position.z + gauss(rng, noise.altitude_sigma)).max(0.0);
    let compass_heading = wrap_angle(state.heading + noise.heading_bias + gauss(rng, noise.heading_sigma));
    SensorPacket { timestamp: t, dvl_velocity, dvl_altitude, compass_heading, depth }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavEstimate {
    pub position: Vector3<f64>,
    pub heading: f64,
    /// Distance integrated so far; dead-reckoning error grows with it.
    pub distance: f64,
    pub last_timestamp: Option<f64>,
}

impl NavEstimate {
    pub fn new(position: Vector3<f64>) -> Self {
        Self { position, heading: 0.0, distance: 0.0, last_timestamp: None }
    }
}

/// Integrate one packet. The first packet only sets heading and depth.
pub fn dead_reckon(estimate: &NavEstimate, packet: &SensorPacket) -> Result<NavEstimate, SimError> {
    let dt = match estimate.last_timestamp {
        None => 0.0,
        Some(prev) if packet.timestamp > prev => packet.timestamp - prev,
        Some(prev) => return Err(SimError::NonMonotoneTimestamp { previous: prev, next: packet.timestamp }),
    };
    let horizontal = Vector3::new(packet.dvl_velocity.x, packet.dvl_velocity.y, 0.0);
    let step = body_to_world(packet.compass_heading, &horizontal) * dt;
    let mut next = *estimate;
    next.position += step;
    next.position.z = packet.depth;
    next.heading = packet.compass_heading;
    next.distance += step.norm();
    next.last_timestamp = Some(packet.timestamp);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moving(heading: f64) -> VehicleState {
        VehicleState {
            position: Vector3::new(0.0, 0.0, 8.0),
            heading,
            velocity: Vector3::new(1.0, 0.0, 0.0),
            yaw_rate: 0.0,
        }
    }

    #[test]
    fn zero_noise_packet_is_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = moving(0.4);
        let p = sense(&s, 20.0, &SensorNoise::default(), 1.5, &mut rng);
        assert_eq!(p.dvl_velocity, s.velocity);
        assert_eq!(p.depth, 8.0);
        assert_eq!(p.dvl_altitude, 12.0);
        assert_eq!(p.compass_heading, 0.4);
        assert_eq!(p.timestamp, 1.5);
    }

    #[test]
    fn compass_bias_is_added() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = SensorNoise { heading_bias: 10f64.to_radians(), ..Default::default() };
        let p = sense(&moving(0.2), 20.0, &noise, 0.0, &mut rng);
        assert!((p.compass_heading - (0.2 + 10f64.to_radians())).abs() < 1e-15);
    }

    #[test]
    fn velocity_noise_has_configured_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = SensorNoise { velocity_sigma: 0.01, ..Default::default() };
        let s = moving(0.0);
        let xs: Vec<f64> = (0..10_000).map(|_| sense(&s, 20.0, &noise, 0.0, &mut rng).dvl_velocity.x).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
        assert!((sd - 0.01).abs() < 0.05 * 0.01, "sd {sd}");
    }

    #[test]
    fn altitude_never_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = SensorNoise { altitude_sigma: 0.5, ..Default::default() };
        let mut s = moving(0.0);
        s.position.z = 20.0;
        for _ in 0..1000 {
            assert!(sense(&s, 20.0, &noise, 0.0, &mut rng).dvl_altitude >= 0.0);
        }
    }

    #[test]
    fn straight_line_east() {
        let east = std::f64::consts::FRAC_PI_2;
        let mut est = NavEstimate::new(Vector3::zeros());
        for k in 0..=1000 {
            let p = SensorPacket {
                timestamp: k as f64 * 0.01,
                dvl_velocity: Vector3::new(1.0, 0.0, 0.0),
                dvl_altitude: 5.0,
                compass_heading: east,
                depth: 3.0,
            };
            est = dead_reckon(&est, &p).unwrap();
        }
        assert!((est.position - Vector3::new(0.0, 10.0, 3.0)).norm() < 1e-6);
        assert!((est.distance - 10.0).abs() < 1e-9);
    }

    #[test]
    fn zero_velocity_is_stationary() {
        let mut est = NavEstimate::new(Vector3::new(4.0, 5.0, 0.0));
        for k in 0..50 {
            let p = SensorPacket {
                timestamp: k as f64 * 0.1,
                dvl_velocity: Vector3::zeros(),
                dvl_altitude: 5.0,
                compass_heading: 1.0,
                depth: 2.0,
            };
            est = dead_reckon(&est, &p).unwrap();
        }
        assert_eq!(est.position, Vector3::new(4.0, 5.0, 2.0));
    }

    #[test]
    fn timestamps_must_increase() {
        let p = SensorPacket {
            timestamp: 1.0,
            dvl_velocity: Vector3::zeros(),
            dvl_altitude: 1.0,
            compass_heading: 0.0,
            depth: 0.0,
        };
        let est = dead_reckon(&NavEstimate::new(Vector3::zeros()), &p).unwrap();
        assert!(matches!(dead_reckon(&est, &p), Err(SimError::NonMonotoneTimestamp { .. })));
    }
}
