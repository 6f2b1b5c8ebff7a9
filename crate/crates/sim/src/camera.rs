//! Pinhole camera fixed to the vehicle, looking forward and tilted down.
//!
//! Body frame: x forward, y right, z down. Camera frame: X right, Y down in
//! the image, Z along the optical axis.

use nalgebra::Vector3;
use reefloop_core::{BBox, Point2};
use serde::{Deserialize, Serialize};

use crate::vehicle::{body_to_world, world_to_body, VehicleState};
use crate::world::{AnimalState, Extent};

/// Camera-frame depth below which a point counts as behind the camera, m.
const NEAR_PLANE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub focal_px: f64,
    /// Principal point; the image center when absent.
    pub principal: Option<[f64; 2]>,
    /// Mount angle below the horizon, rad.
    pub tilt_rad: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self { width: 320, height: 240, focal_px: 250.0, principal: None, tilt_rad: std::f64::consts::FRAC_PI_6 }
    }
}

/// Where the camera is: the vehicle position and heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    pub heading: f64,
}

impl From<&VehicleState> for CameraPose {
    fn from(v: &VehicleState) -> Self {
        Self { position: v.position, heading: v.heading }
    }
}

impl CameraModel {
    pub fn principal_point(&self) -> (f64, f64) {
        match self.principal {
            Some([cx, cy]) => (cx, cy),
            None => (self.width as f64 / 2.0, self.height as f64 / 2.0),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 || !(self.focal_px > 0.0) {
            return Err("camera needs a positive resolution and focal length".into());
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.tilt_rad) {
            return Err(format!("camera tilt {} rad out of range", self.tilt_rad));
        }
        Ok(())
    }

    /// Camera axes expressed in the body frame.
    fn axes(&self) -> [Vector3<f64>; 3] {
        let (s, c) = self.tilt_rad.sin_cos();
        [Vector3::new(0.0, 1.0, 0.0), Vector3::new(-s, 0.0, c), Vector3::new(c, 0.0, s)]
    }

    pub fn world_to_camera(&self, pose: &CameraPose, p: &Vector3<f64>) -> Vector3<f64> {
        let b = world_to_body(pose.heading, &(p - pose.position));
        let [ax, ay, az] = self.axes();
        Vector3::new(ax.dot(&b), ay.dot(&b), az.dot(&b))
    }

    pub fn camera_to_world_dir(&self, pose: &CameraPose, d: &Vector3<f64>) -> Vector3<f64> {
        let [ax, ay, az] = self.axes();
        body_to_world(pose.heading, &(ax * d.x + ay * d.y + az * d.z))
    }

    /// Pinhole projection of a camera-frame point; `None` behind the camera.
    pub fn project_camera(&self, pc: &Vector3<f64>) -> Option<Point2> {
        if pc.z <= NEAR_PLANE {
            return None;
        }
        let (cx, cy) = self.principal_point();
        Some(Point2::new(cx + self.focal_px * pc.x / pc.z, cy + self.focal_px * pc.y / pc.z))
    }

    /// Pixel position of a world point, or `None` if it is behind the camera.
    pub fn project(&self, pose: &CameraPose, p: &Vector3<f64>) -> Option<Point2> {
        self.project_camera(&self.world_to_camera(pose, p))
    }

    /// World-frame direction through pixel coordinates `(u, v)`.
    pub fn ray(&self, pose: &CameraPose, u: f64, v: f64) -> Vector3<f64> {
        let (cx, cy) = self.principal_point();
        self.camera_to_world_dir(pose, &Vector3::new((u - cx) / self.focal_px, (v - cy) / self.focal_px, 1.0))
    }
}

/// The eight corners of an animal's body box in world coordinates.
pub fn animal_corners(animal: &AnimalState, extent: &Extent) -> [Vector3<f64>; 8] {
    let (hl, hw, hh) = (extent.length / 2.0, extent.width / 2.0, extent.height / 2.0);
    let mut out = [Vector3::zeros(); 8];
    for (i, c) in out.iter_mut().enumerate() {
        let local = Vector3::new(
            if i & 1 == 0 { -hl } else { hl },
            if i & 2 == 0 { -hw } else { hw },
            if i & 4 == 0 { -hh } else { hh },
        );
        *c = animal.position + body_to_world(animal.heading, &local);
    }
    out
}

/// Unclipped image hull of the animal; `None` if any corner is behind the camera.
pub fn projected_hull(camera: &CameraModel, pose: &CameraPose, animal: &AnimalState, extent: &Extent) -> Option<BBox> {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in animal_corners(animal, extent) {
        let p = camera.project(pose, &c)?;
        lo = (lo.0.min(p.u), lo.1.min(p.v));
        hi = (hi.0.max(p.u), hi.1.max(p.v));
    }
    Some(BBox::from_corners(lo.0, lo.1, hi.0, hi.1))
}

/// Ground-truth box: the projected hull clipped to the image, `None` when the
/// animal is behind the camera or entirely outside the frame.
pub fn gt_bbox(camera: &CameraModel, pose: &CameraPose, animal: &AnimalState, extent: &Extent) -> Option<BBox> {
    projected_hull(camera, pose, animal, extent)?.clip(camera.width as f64, camera.height as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(camera: &CameraModel) -> CameraModel {
        CameraModel { tilt_rad: 0.0, ..*camera }
    }

    fn pose() -> CameraPose {
        CameraPose { position: Vector3::new(0.0, 0.0, 10.0), heading: 0.0 }
    }

    /// World point `range` meters down the optical axis.
    fn on_axis(cam: &CameraModel, pose: &CameraPose, range: f64) -> Vector3<f64> {
        pose.position + cam.camera_to_world_dir(pose, &Vector3::new(0.0, 0.0, range))
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = CameraModel::default();
        for heading in [0.0, 1.0, -2.5] {
            let p = CameraPose { heading, ..pose() };
            let px = cam.project(&p, &on_axis(&cam, &p, 5.0)).unwrap();
            assert!((px.u - 160.0).abs() < 1e-9 && (px.v - 120.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tilt_points_the_axis_down() {
        let cam = CameraModel::default();
        let p = on_axis(&cam, &pose(), 10.0);
        assert!((p.x - 10.0 * (30f64).to_radians().cos()).abs() < 1e-12);
        assert!((p.z - 10.0 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn pinhole_offset() {
        let cam = CameraModel { focal_px: 400.0, ..CameraModel::default() };
        let p = pose();
        // one meter to the right of the axis, five meters along it
        let right = Vector3::new(0.0, 1.0, 0.0);
        let px = cam.project(&p, &(on_axis(&cam, &p, 5.0) + right)).unwrap();
        assert!((px.u - (160.0 + 80.0)).abs() < 1e-9);
        assert!((px.v - 120.0).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_is_none() {
        let cam = CameraModel::default();
        assert!(cam.project(&pose(), &Vector3::new(-5.0, 0.0, 10.0)).is_none());
        assert!(cam.project(&pose(), &pose().position).is_none());
    }

    #[test]
    fn rays_invert_projection() {
        let cam = CameraModel::default();
        let p = CameraPose { heading: 0.7, ..pose() };
        let d = cam.ray(&p, 33.0, 201.0);
        let px = cam.project(&p, &(p.position + d * 7.0)).unwrap();
        assert!((px.u - 33.0).abs() < 1e-9 && (px.v - 201.0).abs() < 1e-9);
    }

    #[test]
    fn centered_animal_gives_centered_box() {
        let cam = CameraModel::default();
        let p = pose();
        for heading in [0.0, 0.5, 1.57, 3.0] {
            let mut a = AnimalState::new(on_axis(&cam, &p, 6.0), heading);
            a.heading = heading;
            let extent = Extent { length: 0.8, width: 0.3, height: 0.3 };
            let b = gt_bbox(&cam, &p, &a, &extent).unwrap();
            let c = b.center();
            let centroid = cam.project(&p, &a.position).unwrap();
            // a level camera keeps the hull symmetric; tilted, perspective
            // shifts it by well under a pixel at this range
            assert!((c.u - centroid.u).abs() < 1.0 && (c.v - centroid.v).abs() < 1.0, "{c:?} vs {centroid:?}");
        }
        let lc = level(&cam);
        let a = AnimalState::new(on_axis(&lc, &p, 6.0), 0.0);
        let b = gt_bbox(&lc, &p, &a, &Extent { length: 0.8, width: 0.3, height: 0.3 }).unwrap();
        assert!((b.center().u - 160.0).abs() < 1e-9 && (b.center().v - 120.0).abs() < 1e-9);
    }

    #[test]
    fn doubling_range_halves_width() {
        let cam = CameraModel::default();
        let p = pose();
        // broadside fish, largest dimension 0.5 m, seen at 10x and 20x that
        let extent = Extent { length: 0.5, width: 0.1, height: 0.2 };
        let side = std::f64::consts::FRAC_PI_2;
        let w = |r: f64| gt_bbox(&cam, &p, &AnimalState::new(on_axis(&cam, &p, r), side), &extent).unwrap().w;
        let (w1, w2) = (w(5.0), w(10.0));
        assert!((w2 / w1 - 0.5).abs() < 0.02 * 0.5, "{w1} {w2}");
    }

    #[test]
    fn off_screen_animal_has_no_box() {
        let cam = CameraModel::default();
        let p = pose();
        let a = AnimalState::new(on_axis(&cam, &p, 6.0) + Vector3::new(0.0, -20.0, 0.0), 0.0);
        assert!(gt_bbox(&cam, &p, &a, &Extent { length: 0.5, width: 0.5, height: 0.5 }).is_none());
        let behind = AnimalState::new(Vector3::new(-6.0, 0.0, 10.0), 0.0);
        assert!(gt_bbox(&cam, &p, &behind, &Extent { length: 0.5, width: 0.5, height: 0.5 }).is_none());
    }
}
