//! Fixed stereo pinhole camera.
//!
//! Image coordinates are metric (millimeters on the image plane). The left
//! lens sees `u_l = f_u (2X - b) / (2Z)` and the right lens
//! `u_r = f_u (2X + b) / (2Z)`, so disparity `u_r - u_l = b f_u / Z` is
//! positive in front of the camera.

use nalgebra::{Vector3, Vector6};

use crate::error::{Error, Result};
use crate::kinematics::HomTransform;

/// Depths at or below this are rejected by [`project`].
pub const MIN_PROJECT_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    /// Horizontal focal length, mm.
    pub f_u: f64,
    /// Vertical focal length, mm.
    pub f_v: f64,
    /// Skew, mm.
    pub skew: f64,
    pub u0: f64,
    pub v0: f64,
    /// Baseline, m.
    pub baseline: f64,
    /// Full horizontal view angle, degrees.
    pub fov_w_deg: f64,
    /// Full vertical view angle, degrees.
    pub fov_h_deg: f64,
    /// Near-plane cutoff for [`in_view`], m.
    pub z_min: f64,
}

impl Default for CameraIntrinsics {
    /// ZED 2 parameters.
    fn default() -> Self {
        Self {
            f_u: 2.8,
            f_v: 2.8,
            skew: 0.0,
            u0: 0.0,
            v0: 0.0,
            baseline: 0.12,
            fov_w_deg: 86.09,
            fov_h_deg: 55.35,
            z_min: 0.05,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f_u > 0.0
            && self.f_v > 0.0
            && self.baseline > 0.0
            && self.fov_w_deg > 0.0
            && self.fov_w_deg < 180.0
            && self.fov_h_deg > 0.0
            && self.fov_h_deg < 180.0
            && self.z_min > 0.0
            && [self.skew, self.u0, self.v0].iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid camera intrinsics: {self:?}")))
        }
    }

    /// Half-extent of the image plane along u, mm.
    pub fn u_max(&self) -> f64 {
        self.f_u * (self.fov_w_deg.to_radians() / 2.0).tan()
    }

    /// Half-extent of the image plane along v, mm.
    pub fn v_max(&self) -> f64 {
        self.f_v * (self.fov_h_deg.to_radians() / 2.0).tan()
    }
}

/// Camera frame expressed in the base frame (`T_C^O`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub camera_in_base: HomTransform,
    base_in_camera: HomTransform,
}

impl CameraPose {
    pub fn new(camera_in_base: HomTransform) -> Result<Self> {
        if camera_in_base.rigidity_error() > 1e-9 {
            return Err(Error::Config("camera pose is not a rigid transform".into()));
        }
        Ok(Self { camera_in_base, base_in_camera: camera_in_base.inverse() })
    }

    /// `T_O^C`.
    pub fn base_in_camera(&self) -> &HomTransform {
        &self.base_in_camera
    }
}

/// A point seen by both lenses: `(u_l, u_r, v)` in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint {
    pub ul: f64,
    pub ur: f64,
    pub v: f64,
}

impl ImagePoint {
    pub fn disparity(&self) -> f64 {
        self.ur - self.ul
    }
}

/// Stereo features of both markers `[ul1, ur1, v1, ul2, ur2, v2]` (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub Vector6<f64>);

impl FeatureVector {
    pub fn from_points(p1: ImagePoint, p2: ImagePoint) -> Self {
        Self(Vector6::new(p1.ul, p1.ur, p1.v, p2.ul, p2.ur, p2.v))
    }

    pub fn point(&self, marker: usize) -> ImagePoint {
        let o = 3 * marker;
        ImagePoint { ul: self.0[o], ur: self.0[o + 1], v: self.0[o + 2] }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

pub fn world_to_camera(pose: &CameraPose, p_base: &Vector3<f64>) -> Vector3<f64> {
    pose.base_in_camera.transform_point(p_base)
}

pub fn camera_to_world(pose: &CameraPose, p_cam: &Vector3<f64>) -> Vector3<f64> {
    pose.camera_in_base.transform_point(p_cam)
}

/// Stereo projection including skew and principal-point offsets; reduces to
/// the plain pinhole form when they are zero.
pub fn project(intr: &CameraIntrinsics, p_cam: &Vector3<f64>) -> Result<ImagePoint> {
    let (x, y, z) = (p_cam.x, p_cam.y, p_cam.z);
    if !(z > MIN_PROJECT_DEPTH) {
        return Err(Error::BehindCamera { z });
    }
    let u_common = (intr.f_u * x + intr.skew * y) / z + intr.u0;
    let half = intr.baseline * intr.f_u / (2.0 * z);
    Ok(ImagePoint { ul: u_common - half, ur: u_common + half, v: intr.f_v * y / z + intr.v0 })
}

/// Inverse of [`project`] from a stereo pair.
pub fn triangulate(intr: &CameraIntrinsics, p: &ImagePoint) -> Result<Vector3<f64>> {
    let disparity = p.disparity();
    if !(disparity > 1e-12) {
        return Err(Error::InvalidDisparity { disparity });
    }
    let z = intr.baseline * intr.f_u / disparity;
    let y = (p.v - intr.v0) * z / intr.f_v;
    let u_mid = 0.5 * (p.ul + p.ur) - intr.u0;
    let x = (u_mid * z - intr.skew * y) / intr.f_u;
    Ok(Vector3::new(x, y, z))
}

/// Whether both lenses see the point inside their view angles.
pub fn in_view(intr: &CameraIntrinsics, p_cam: &Vector3<f64>) -> bool {
    if !(p_cam.z > intr.z_min) {
        return false;
    }
    match project(intr, p_cam) {
        Ok(ip) => point_within(intr, &ip, 0.0),
        Err(_) => false,
    }
}

/// Whether an image point lies inside the image bounds shrunk by `margin`
/// (fraction of each half-extent).
pub fn point_within(intr: &CameraIntrinsics, p: &ImagePoint, margin: f64) -> bool {
    let um = intr.u_max() * (1.0 - margin);
    let vm = intr.v_max() * (1.0 - margin);
    p.ul.abs() <= um && p.ur.abs() <= um && p.v.abs() <= vm
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn on_axis_point_projects_symmetrically() {
        let intr = CameraIntrinsics::default();
        let p = project(&intr, &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((p.ul + 0.168).abs() < 1e-12);
        assert!((p.ur - 0.168).abs() < 1e-12);
        assert_eq!(p.v, 0.0);
    }

    #[test]
    fn left_axis_crossing() {
        let intr = CameraIntrinsics::default();
        for z in [0.3, 1.0, 4.0] {
            let p = project(&intr, &Vector3::new(intr.baseline / 2.0, 0.2, z)).unwrap();
            assert!(p.ul.abs() < 1e-15);
        }
    }

    #[test]
    fn depth_doubling_halves_coordinates() {
        let intr = CameraIntrinsics::default();
        let a = project(&intr, &Vector3::new(0.1, -0.2, 1.5)).unwrap();
        let b = project(&intr, &Vector3::new(0.1, -0.2, 3.0)).unwrap();
        assert!((a.ul - 2.0 * b.ul).abs() < 1e-15);
        assert!((a.ur - 2.0 * b.ur).abs() < 1e-15);
        assert!((a.v - 2.0 * b.v).abs() < 1e-15);
    }

    #[test]
    fn behind_camera_is_rejected() {
        let intr = CameraIntrinsics::default();
        assert!(matches!(project(&intr, &Vector3::new(0.0, 0.0, -1.0)), Err(Error::BehindCamera { .. })));
    }

    #[test]
    fn triangulate_example() {
        let intr = CameraIntrinsics::default();
        let p = triangulate(&intr, &ImagePoint { ul: -0.168, ur: 0.168, v: 0.0 }).unwrap();
        assert!((p - Vector3::new(0.0, 0.0, 1.0)).amax() < 1e-12);
        assert!(triangulate(&intr, &ImagePoint { ul: 0.1, ur: 0.1, v: 0.0 }).is_err());
    }

    #[test]
    fn general_model_round_trip() {
        let intr = CameraIntrinsics { skew: 0.01, u0: 0.2, v0: -0.1, f_v: 2.7, ..Default::default() };
        let p = Vector3::new(0.3, -0.4, 2.2);
        let back = triangulate(&intr, &project(&intr, &p).unwrap()).unwrap();
        assert!((back - p).amax() < 1e-12);
    }

    #[test]
    fn view_bounds() {
        let intr = CameraIntrinsics::default();
        assert!((intr.u_max() - 2.6152).abs() < 1e-3);
        assert!((intr.v_max() - 1.4685).abs() < 1e-3);
        assert!(in_view(&intr, &Vector3::new(0.0, 0.0, 1.0)));
        assert!(!in_view(&intr, &Vector3::new(0.0, 0.0, -1.0)));
        assert!(!in_view(&intr, &Vector3::new(0.0, 0.0, 0.01)));
        assert!(!in_view(&intr, &Vector3::new(0.0, 0.6, 1.0)));
    }

    #[test]
    fn camera_center_maps_to_origin() {
        let t = HomTransform::from_parts(
            &Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0),
            &Vector3::new(-2.0, 0.2, 0.8),
        );
        let pose = CameraPose::new(t).unwrap();
        let c = world_to_camera(&pose, &Vector3::new(-2.0, 0.2, 0.8));
        assert!(c.amax() < 1e-15);
        let id = CameraPose::new(HomTransform::identity()).unwrap();
        let p = Vector3::new(0.3, 0.1, -0.2);
        assert_eq!(world_to_camera(&id, &p), p);
    }
}
