use std::f64::consts::PI;

use nalgebra::Vector3;
use reefloop_sim::nav::{dead_reckon, NavEstimate, SensorNoise, SensorPacket};
use reefloop_sim::vehicle::world_to_body;
use reefloop_sim::{ControlCommand, Scenario, Simulation};

/// A figure-eight with known position, velocity and heading at any time.
/// The vehicle points along its velocity, so the DVL sees pure surge.
struct FigureEight {
    a: f64,
    omega: f64,
}

impl FigureEight {
    fn position(&self, t: f64) -> Vector3<f64> {
        let s = self.omega * t;
        Vector3::new(self.a * s.sin(), self.a * s.sin() * s.cos(), 4.0)
    }

    fn velocity(&self, t: f64) -> Vector3<f64> {
        let s = self.omega * t;
        Vector3::new(self.a * self.omega * s.cos(), self.a * self.omega * (2.0 * s).cos(), 0.0)
    }

    fn heading(&self, t: f64) -> f64 {
        let v = self.velocity(t);
        v.y.atan2(v.x)
    }

    fn packet(&self, t: f64, bias: f64) -> SensorPacket {
        let h = self.heading(t);
        SensorPacket {
            timestamp: t,
            dvl_velocity: world_to_body(h, &self.velocity(t)),
            dvl_altitude: 10.0,
            compass_heading: h + bias,
            depth: 4.0,
        }
    }
}

/// Dead-reckon the figure-eight for `duration` at step `dt`; returns the
/// largest horizontal error against truth.
fn max_error(dt: f64, duration: f64) -> f64 {
    let path = FigureEight { a: 10.0, omega: 0.2 };
    let mut est = NavEstimate::new(path.position(0.0));
    let steps = (duration / dt).round() as usize;
    let mut worst: f64 = 0.0;
    for k in 0..=steps {
        // velocity sampled at the end of each interval (what the DVL just measured)
        let t = k as f64 * dt;
        est = dead_reckon(&est, &path.packet(t, 0.0)).unwrap();
        let mut d = est.position - path.position(t);
        d.z = 0.0;
        worst = worst.max(d.norm());
    }
    worst
}

#[test]
fn dead_reckoning_converges_as_dt_shrinks() {
    let errors: Vec<f64> = [0.1, 0.01, 0.001].iter().map(|dt| max_error(*dt, 30.0)).collect();
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    // first-order scheme: ten times smaller step, roughly ten times smaller error
    assert!(errors[1] < errors[0] / 5.0 && errors[2] < errors[1] / 5.0, "{errors:?}");
    assert!(errors[2] < 0.01, "{errors:?}");
}

#[test]
fn compass_bias_rotates_the_track() {
    let path = FigureEight { a: 10.0, omega: 0.2 };
    let bias = 10f64.to_radians();
    let origin = path.position(0.0);
    let mut est = NavEstimate::new(origin);
    let mut truth = NavEstimate::new(origin);
    let dt = 0.01;
    let (s, c) = bias.sin_cos();
    let mut worst: f64 = 0.0;
    for k in 0..=((2.0 * PI / 0.2) / dt) as usize {
        let t = k as f64 * dt;
        est = dead_reckon(&est, &path.packet(t, bias)).unwrap();
        truth = dead_reckon(&truth, &path.packet(t, 0.0)).unwrap();
        let d = truth.position - origin;
        let rotated = origin + Vector3::new(c * d.x - s * d.y, s * d.x + c * d.y, d.z);
        worst = worst.max((est.position - rotated).xy().norm());
    }
    assert!(truth.distance > 60.0, "{}", truth.distance);
    assert!(worst < 1e-3, "max deviation {worst}");
}

#[test]
fn noise_free_estimate_reproduces_simulated_truth() {
    let mut scenario = Scenario::reference_midwater();
    scenario.vehicle.noise = SensorNoise::default();
    let mut sim = Simulation::new(scenario).unwrap();
    let mut est = NavEstimate::new(sim.vehicle().position);
    est = dead_reckon(&est, &sim.sense()).unwrap();
    for k in 0..600 {
        let t = k as f64 * 0.1;
        let cmd = ControlCommand::new(0.8 * (0.3 * t).sin(), 0.2, 0.1 * (0.1 * t).cos(), 0.5 * (0.2 * t).cos());
        sim.step(&cmd).unwrap();
        est = dead_reckon(&est, &sim.sense()).unwrap();
        assert!((est.position - sim.vehicle().position).norm() < 1e-9);
    }
}

#[test]
fn noisy_sensors_are_deterministic_per_seed() {
    let run = || {
        let mut sim = Simulation::new(Scenario::reference_midwater()).unwrap();
        let mut est = NavEstimate::new(sim.vehicle().position);
        for _ in 0..100 {
            sim.step(&ControlCommand::new(0.5, 0.0, 0.0, 0.1)).unwrap();
            est = dead_reckon(&est, &sim.sense()).unwrap();
        }
        est
    };
    assert_eq!(run(), run());
}
