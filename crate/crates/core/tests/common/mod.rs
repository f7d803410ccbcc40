#![allow(dead_code)]

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ibvs::servo::ServoPlant;
use ibvs::sim::builtin_scenario;
use ibvs::stereo::{project, CameraIntrinsics, CameraPose, FeatureVector};
use ibvs::vision::{draw_ring, GrayImage, Marker, PixelMap};

pub fn builtin_plant() -> ServoPlant {
    let sc = builtin_scenario(1).unwrap().resolve().unwrap();
    ServoPlant { geometry: sc.model_geometry, intrinsics: sc.intrinsics, camera: sc.camera }
}

/// Isolated ring on a blank image; returns the image and its true center.
pub fn random_ring(rng: &mut ChaCha8Rng) -> (GrayImage, f64, f64, f64) {
    let r = rng.gen_range(8.0..60.0);
    let size = 160;
    let a = rng.gen_range(r + 5.0..size as f64 - r - 5.0);
    let b = rng.gen_range(r + 5.0..size as f64 - r - 5.0);
    let mut img = GrayImage::new(size, size).unwrap();
    draw_ring(&mut img, a, b, r);
    (img, a, b, r)
}

/// Two markers in front of an identity-pose camera, both in view, with
/// well separated projections. Returns the markers (camera frame) and the
/// ideal features.
pub fn random_marker_scene(
    rng: &mut ChaCha8Rng,
    intr: &CameraIntrinsics,
    pmap: &PixelMap,
    radii: [f64; 2],
    half_tool: f64,
) -> ([Marker; 2], FeatureVector) {
    loop {
        let z = rng.gen_range(0.6..1.3);
        let p1 = Vector3::new(
            rng.gen_range(-0.6..0.6) * z * intr.u_max() / intr.f_u,
            rng.gen_range(-0.6..0.6) * z * intr.v_max() / intr.f_v,
            z,
        );
        let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if dir.norm() < 0.2 {
            continue;
        }
        let p2 = p1 + dir.normalize() * half_tool;
        let ms = [Marker { position: p1, radius: radii[0] }, Marker { position: p2, radius: radii[1] }];
        let (Ok(i1), Ok(i2)) = (project(intr, &p1), project(intr, &p2)) else { continue };
        let in_view = [p1, p2].iter().all(|p| ibvs::stereo::in_view(intr, p));
        let px = |u: f64, v: f64| pmap.to_pixel(intr, u, v);
        let (l1, l2) = (px(i1.ul, i1.v), px(i2.ul, i2.v));
        let (r1, r2) = (pmap.f_px * radii[0] / p1.z, pmap.f_px * radii[1] / p2.z);
        let gap = (l1.0 - l2.0).hypot(l1.1 - l2.1);
        let edge_ok = [(l1, r1), (l2, r2), (px(i1.ur, i1.v), r1), (px(i2.ur, i2.v), r2)].iter().all(|((x, y), r)| {
            *x > r + 3.0 && *y > r + 3.0 && *x < pmap.width as f64 - r - 3.0 && *y < pmap.height as f64 - r - 3.0
        });
        if in_view && edge_ok && gap > r1 + r2 + 6.0 && r1.min(r2) >= 4.0 && r1 > r2 + 1.0 {
            return (ms, FeatureVector::from_points(i1, i2));
        }
    }
}

pub fn identity_camera() -> CameraPose {
    CameraPose::new(ibvs::kinematics::HomTransform::identity()).unwrap()
}
