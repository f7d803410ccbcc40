//! The combined camera-and-robot map from joint angles to stereo features,
//! its inverse, and its finite-difference Jacobian.

use nalgebra::{Matrix3, Matrix6, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{
    forward_kinematics, inverse_kinematics_nearest, tool_points_base, HomTransform, JointAngles, RobotGeometry,
};
use crate::stereo::{
    camera_to_world, in_view, project, triangulate, world_to_camera, CameraIntrinsics, CameraPose, FeatureVector,
    ImagePoint,
};

/// Central-difference step for [`jacobian`], rad.
pub const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoPlant {
    pub geometry: RobotGeometry,
    pub intrinsics: CameraIntrinsics,
    pub camera: CameraPose,
}

/// Features together with per-marker validity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedFeatures {
    pub features: FeatureVector,
    pub in_view: [bool; 2],
    /// False when the marker is at or behind the projection plane; its
    /// entries are NaN.
    pub physical: [bool; 2],
}

impl ObservedFeatures {
    pub fn all_in_view(&self) -> bool {
        self.in_view.iter().all(|v| *v)
    }
}

/// First-order model `p = C1 q + C2` about `q0`, with `C2 = F(q0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedPlant {
    /// Jacobian `dF/dq` at `q0`, mm/rad.
    pub c1: Matrix6<f64>,
    /// `F(q0)`, mm.
    pub c2: FeatureVector,
    pub q0: JointAngles,
}

/// `F(q)`, computed on the virtual (unbounded) image plane.
pub fn features_of_joints(plant: &ServoPlant, q: &JointAngles) -> ObservedFeatures {
    let (p1, p2) = tool_points_base(&plant.geometry, q);
    let mut pts = [ImagePoint { ul: f64::NAN, ur: f64::NAN, v: f64::NAN }; 2];
    let mut in_view_flags = [false; 2];
    let mut physical = [false; 2];
    for (i, p) in [p1, p2].iter().enumerate() {
        let pc = world_to_camera(&plant.camera, p);
        if let Ok(ip) = project(&plant.intrinsics, &pc) {
            pts[i] = ip;
            physical[i] = true;
            in_view_flags[i] = in_view(&plant.intrinsics, &pc);
        }
    }
    ObservedFeatures { features: FeatureVector::from_points(pts[0], pts[1]), in_view: in_view_flags, physical }
}

/// Model-predicted features from the inner-loop output angles, regardless of
/// whether the camera could see them.
pub fn estimate_features(plant: &ServoPlant, q_t: &JointAngles) -> Result<FeatureVector> {
    let obs = features_of_joints(plant, q_t);
    if let Some(i) = obs.physical.iter().position(|p| !p) {
        let (p1, p2) = tool_points_base(&plant.geometry, q_t);
        let z = world_to_camera(&plant.camera, if i == 0 { &p1 } else { &p2 }).z;
        return Err(Error::BehindCamera { z });
    }
    Ok(obs.features)
}

/// Recovers joint angles from features.
///
/// The marker pair fixes the flange position and the z6 direction; the roll
/// about z6 is taken from the forward kinematics of `q_hint`, and the IK
/// branch nearest `q_hint` is returned.
pub fn inverse_features(plant: &ServoPlant, p: &FeatureVector, q_hint: &JointAngles) -> Result<JointAngles> {
    let target = reconstruct_pose(plant, p, q_hint)?;
    Ok(inverse_kinematics_nearest(&plant.geometry, &target, q_hint)?.q)
}

/// Flange pose implied by the features, with roll borrowed from `q_hint`.
pub fn reconstruct_pose(plant: &ServoPlant, p: &FeatureVector, q_hint: &JointAngles) -> Result<HomTransform> {
    let p1 = camera_to_world(&plant.camera, &triangulate(&plant.intrinsics, &p.point(0))?);
    let p2 = camera_to_world(&plant.camera, &triangulate(&plant.intrinsics, &p.point(1))?);
    let axis = p2 - p1;
    let len = axis.norm();
    if !(len > 1e-9) {
        return Err(Error::DegenerateFeatures(format!("marker separation {len:.3e} m")));
    }
    let a = axis / len;
    let hint_pose = forward_kinematics(&plant.geometry, q_hint);
    let n = orthogonal_component(&hint_pose.n(), &a)
        .or_else(|| orthogonal_component(&hint_pose.s(), &a).map(|s| s.cross(&a)))
        .ok_or_else(|| Error::DegenerateFeatures("cannot complete roll from hint".into()))?;
    let s = a.cross(&n);
    Ok(HomTransform::from_parts(&Matrix3::from_columns(&[n, s, a]), &p1))
}

fn orthogonal_component(v: &Vector3<f64>, axis: &Vector3<f64>) -> Option<Vector3<f64>> {
    let w = v - axis * axis.dot(v);
    let n = w.norm();
    (n > 1e-6).then(|| w / n)
}

/// Central-difference Jacobian of `F` at `q0`.
pub fn jacobian(plant: &ServoPlant, q0: &JointAngles) -> Result<LinearizedPlant> {
    jacobian_with_step(plant, q0, JACOBIAN_STEP)
}

/// [`jacobian`] with an explicit stencil half-width `h` (rad).
pub fn jacobian_with_step(plant: &ServoPlant, q0: &JointAngles, h: f64) -> Result<LinearizedPlant> {
    let c2 = features_of_joints(plant, q0).features;
    if !c2.is_finite() {
        return Err(Error::JacobianStencil { joint: 0 });
    }
    let mut c1 = Matrix6::zeros();
    for j in 0..6 {
        let mut qp = *q0;
        let mut qm = *q0;
        qp[j] += h;
        qm[j] -= h;
        let fp = features_of_joints(plant, &qp).features;
        let fm = features_of_joints(plant, &qm).features;
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::JacobianStencil { joint: j + 1 });
        }
        c1.set_column(j, &((fp.0 - fm.0) / (2.0 * h)));
    }
    Ok(LinearizedPlant { c1, c2, q0: *q0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;

    fn plant_looking_along_tool(q: &JointAngles) -> ServoPlant {
        let geometry = RobotGeometry::default();
        let t = forward_kinematics(&geometry, q);
        let a = t.a();
        let origin = t.translation() - a;
        // camera z along the tool axis; x/y from the flange frame
        let cam = HomTransform::from_parts(&Matrix3::from_columns(&[t.n(), t.s(), a]), &origin);
        ServoPlant { geometry, intrinsics: CameraIntrinsics::default(), camera: CameraPose::new(cam).unwrap() }
    }

    #[test]
    fn on_axis_markers_are_symmetric() {
        let q = JointAngles::new(0.1, 0.2, -0.1, 0.3, 0.5, -0.2);
        let plant = plant_looking_along_tool(&q);
        let f = features_of_joints(&plant, &q);
        for m in 0..2 {
            let p = f.features.point(m);
            assert!((p.ul + p.ur).abs() < 1e-12);
            assert!(p.v.abs() < 1e-12);
        }
        assert!(f.all_in_view());
    }

    #[test]
    fn degenerate_features_rejected() {
        let q = JointAngles::new(0.1, 0.2, -0.1, 0.3, 0.5, -0.2);
        let plant = plant_looking_along_tool(&q);
        let p = ImagePoint { ul: -0.2, ur: 0.2, v: 0.1 };
        let f = FeatureVector::from_points(p, p);
        assert!(matches!(inverse_features(&plant, &f, &q), Err(Error::DegenerateFeatures(_))));
    }

    #[test]
    fn behind_camera_is_flagged() {
        let q = JointAngles::new(0.1, 0.2, -0.1, 0.3, 0.5, -0.2);
        let mut plant = plant_looking_along_tool(&q);
        // flip the camera around so it looks away
        let t = plant.camera.camera_in_base;
        let flip = HomTransform::from_parts(&Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)), &Vector3::zeros());
        plant.camera = CameraPose::new(t * flip).unwrap();
        let f = features_of_joints(&plant, &q);
        assert_eq!(f.physical, [false, false]);
        assert_eq!(f.in_view, [false, false]);
        assert!(estimate_features(&plant, &q).is_err());
        assert!(matches!(jacobian(&plant, &q), Err(Error::JacobianStencil { .. })));
    }
}
