//! Scenario configuration as read from JSON, and its resolution into runtime
//! objects. Angles are degrees in files and radians everywhere else.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::control::{InnerControllerVariant, InnerRealization, OuterParams};
use crate::error::{Error, Result};
use crate::kinematics::{HomTransform, JointAngles, RobotGeometry};
use crate::stereo::{CameraIntrinsics, CameraPose};
use crate::vision::{HoughParams, PixelMap, MARKER_RADII};

/// Largest `|R^T R - I|` entry accepted before a pose is re-orthonormalized.
pub const POSE_ORTHO_TOL: f64 = 5e-3;

/// Position (m) and orientation columns `n`, `s`, `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub position: [f64; 3],
    pub n: [f64; 3],
    pub s: [f64; 3],
    pub a: [f64; 3],
}

impl PoseSpec {
    pub fn from_transform(t: &HomTransform) -> Self {
        let v = |x: Vector3<f64>| [x.x, x.y, x.z];
        Self { position: v(t.translation()), n: v(t.n()), s: v(t.s()), a: v(t.a()) }
    }

    /// Rigid transform; slightly non-orthonormal rotations (e.g. rounded
    /// table values) are projected onto the nearest rotation.
    pub fn to_transform(&self) -> Result<HomTransform> {
        let vals = self.position.iter().chain(&self.n).chain(&self.s).chain(&self.a);
        if vals.clone().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite pose {self:?}")));
        }
        let m = Matrix3::from_columns(&[Vector3::from(self.n), Vector3::from(self.s), Vector3::from(self.a)]);
        let ortho = (m.transpose() * m - Matrix3::identity()).amax();
        if ortho > POSE_ORTHO_TOL || m.determinant() <= 0.0 {
            return Err(Error::Config(format!(
                "pose orientation is not a rotation (orthogonality error {ortho:.2e}): {self:?}"
            )));
        }
        let r = Rotation3::from_matrix_eps(&m, 1e-15, 200, Rotation3::identity());
        Ok(HomTransform::from_parts(r.matrix(), &Vector3::from(self.position)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StartSpec {
    Pose(PoseSpec),
    JointsDeg([f64; 6]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceSpec {
    /// Added to the inner-loop output angles, degrees.
    pub joints_deg: [f64; 6],
    /// Time the disturbance switches on, s.
    pub onset: f64,
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        Self { joints_deg: [0.0; 6], onset: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntrinsicsSpec {
    pub f_u: f64,
    pub f_v: f64,
    pub skew: f64,
    pub u0: f64,
    pub v0: f64,
    pub baseline: f64,
    pub fov_w_deg: f64,
    pub fov_h_deg: f64,
    pub z_min: f64,
}

impl Default for IntrinsicsSpec {
    fn default() -> Self {
        let c = CameraIntrinsics::default();
        Self {
            f_u: c.f_u,
            f_v: c.f_v,
            skew: c.skew,
            u0: c.u0,
            v0: c.v0,
            baseline: c.baseline,
            fov_w_deg: c.fov_w_deg,
            fov_h_deg: c.fov_h_deg,
            z_min: c.z_min,
        }
    }
}

impl IntrinsicsSpec {
    pub fn resolve(&self) -> Result<CameraIntrinsics> {
        let c = CameraIntrinsics {
            f_u: self.f_u,
            f_v: self.f_v,
            skew: self.skew,
            u0: self.u0,
            v0: self.v0,
            baseline: self.baseline,
            fov_w_deg: self.fov_w_deg,
            fov_h_deg: self.fov_h_deg,
            z_min: self.z_min,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Downward pitch of the default camera, degrees.
pub const DEFAULT_CAMERA_PITCH_DEG: f64 = 9.0;

/// Camera in front of the robot at `[-2.0, 0.2, 0.3]` m, optical axis along
/// +X pitched down by [`DEFAULT_CAMERA_PITCH_DEG`], image u toward -Y.
pub fn default_camera_pose() -> PoseSpec {
    let (sp, cp) = DEFAULT_CAMERA_PITCH_DEG.to_radians().sin_cos();
    PoseSpec { position: [-2.0, 0.2, 0.3], n: [0.0, -1.0, 0.0], s: [-sp, 0.0, -cp], a: [cp, 0.0, -sp] }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSpec {
    pub intrinsics: IntrinsicsSpec,
    pub pose: PoseSpec,
}

impl Default for CameraSpec {
    fn default() -> Self {
        Self { intrinsics: IntrinsicsSpec::default(), pose: default_camera_pose() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerLoopKind {
    #[default]
    ClosedForm,
    DoubleIntegrator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerControllerKind {
    #[default]
    Corrected,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSpec {
    pub tau_in: f64,
    pub omega_n: f64,
    pub zeta: f64,
    pub sigma_tol: f64,
    /// Re-linearize every this many control samples.
    pub adaptation_stride: usize,
    pub hysteresis_margin: f64,
    pub feedback: bool,
    pub inner_loop: InnerLoopKind,
    pub inner_controller: InnerControllerKind,
}

impl Default for ControlSpec {
    fn default() -> Self {
        let o = OuterParams::default();
        Self {
            tau_in: o.tau_in,
            omega_n: o.omega_n,
            zeta: o.zeta,
            sigma_tol: o.sigma_tol,
            adaptation_stride: 1,
            hysteresis_margin: 0.02,
            feedback: true,
            inner_loop: InnerLoopKind::ClosedForm,
            inner_controller: InnerControllerKind::Corrected,
        }
    }
}

impl ControlSpec {
    pub fn outer_params(&self) -> OuterParams {
        OuterParams { omega_n: self.omega_n, zeta: self.zeta, tau_in: self.tau_in, sigma_tol: self.sigma_tol }
    }

    pub fn inner_realization(&self) -> InnerRealization {
        let variant = match self.inner_controller {
            InnerControllerKind::Corrected => InnerControllerVariant::Corrected,
            InnerControllerKind::Printed => InnerControllerVariant::Printed,
        };
        match self.inner_loop {
            InnerLoopKind::ClosedForm => InnerRealization::ClosedForm,
            InnerLoopKind::DoubleIntegrator => InnerRealization::DoubleIntegrator(variant),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSpec {
    pub dt_sim: f64,
    pub dt_ctrl: f64,
    pub horizon: f64,
}

impl Default for TimingSpec {
    fn default() -> Self {
        Self { dt_sim: 1e-4, dt_ctrl: 1e-3, horizon: 2.0 }
    }
}

impl TimingSpec {
    /// Integration substeps per control sample.
    pub fn substeps(&self) -> Result<usize> {
        integer_ratio(self.dt_ctrl, self.dt_sim, "dt_ctrl / dt_sim")
    }

    /// Number of control intervals in the horizon.
    pub fn samples(&self) -> Result<usize> {
        integer_ratio(self.horizon, self.dt_ctrl, "horizon / dt_ctrl")
    }
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    if !(num > 0.0 && den > 0.0 && num.is_finite() && den.is_finite()) {
        return Err(Error::Config(format!("{what}: times must be positive, got {num} / {den}")));
    }
    let r = num / den;
    let k = r.round();
    if k < 1.0 || (r - k).abs() > 1e-6 * k {
        return Err(Error::Config(format!("{what} = {r} is not a positive integer")));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VisionMode {
    #[default]
    Ideal,
    Hough,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoughSpec {
    pub r_min: usize,
    pub r_max: usize,
    pub min_votes: u32,
    pub min_vote_fraction: f64,
    pub edge_threshold: f32,
}

impl Default for HoughSpec {
    fn default() -> Self {
        let h = HoughParams::default();
        Self {
            r_min: h.r_min,
            r_max: h.r_max,
            min_votes: h.min_votes,
            min_vote_fraction: h.min_vote_fraction,
            edge_threshold: h.edge_threshold,
        }
    }
}

impl HoughSpec {
    pub fn params(&self) -> HoughParams {
        HoughParams {
            r_min: self.r_min,
            r_max: self.r_max,
            min_votes: self.min_votes,
            min_vote_fraction: self.min_vote_fraction,
            edge_threshold: self.edge_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionSpec {
    pub mode: VisionMode,
    pub hough: HoughSpec,
    /// Physical radii of marker 1 (flange) and marker 2 (mid-tool), m.
    pub marker_radii: [f64; 2],
    pub image_width: usize,
    pub image_height: usize,
}

impl Default for VisionSpec {
    fn default() -> Self {
        Self {
            mode: VisionMode::Ideal,
            hough: HoughSpec::default(),
            marker_radii: MARKER_RADII,
            image_width: 1280,
            image_height: 720,
        }
    }
}

impl VisionSpec {
    pub fn pixel_map(&self, intr: &CameraIntrinsics) -> PixelMap {
        let (w, h) = (self.image_width, self.image_height);
        PixelMap {
            f_px: (w as f64 / 2.0) / (intr.fov_w_deg.to_radians() / 2.0).tan(),
            cx: w as f64 / 2.0,
            cy: h as f64 / 2.0,
            width: w,
            height: h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySpec {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub a1: f64,
    pub lt: f64,
    pub l_tool: f64,
    pub theta_offsets_deg: [f64; 6],
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self::from_geometry(&RobotGeometry::default())
    }
}

impl GeometrySpec {
    pub fn from_geometry(g: &RobotGeometry) -> Self {
        Self {
            l1: g.l1,
            l2: g.l2,
            l3: g.l3,
            l4: g.l4,
            a1: g.a1,
            lt: g.lt,
            l_tool: g.l_tool,
            theta_offsets_deg: g.theta_offsets.map(f64::to_degrees),
        }
    }

    pub fn resolve(&self) -> Result<RobotGeometry> {
        let g = RobotGeometry {
            l1: self.l1,
            l2: self.l2,
            l3: self.l3,
            l4: self.l4,
            a1: self.a1,
            lt: self.lt,
            l_tool: self.l_tool,
            theta_offsets: self.theta_offsets_deg.map(f64::to_radians),
        };
        g.validate()?;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub start: StartSpec,
    pub target: PoseSpec,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub timing: TimingSpec,
    #[serde(default)]
    pub vision: VisionSpec,
    #[serde(default)]
    pub true_geometry: GeometrySpec,
    #[serde(default)]
    pub model_geometry: GeometrySpec,
    /// Recorded for reproducibility; the loop itself draws no random numbers.
    #[serde(default)]
    pub seed: u64,
}

/// Start condition after resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start {
    Pose(HomTransform),
    Joints(JointAngles),
}

/// Validated runtime form of a [`ScenarioConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub start: Start,
    pub target: HomTransform,
    pub disturbance: JointAngles,
    pub onset: f64,
    pub intrinsics: CameraIntrinsics,
    pub camera: CameraPose,
    pub outer: OuterParams,
    pub inner: InnerRealization,
    pub substeps: usize,
    pub samples: usize,
    pub true_geometry: RobotGeometry,
    pub model_geometry: RobotGeometry,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let c = &self.control;
        let outer = c.outer_params();
        outer.validate()?;
        if c.adaptation_stride == 0 {
            return Err(Error::Config("adaptation_stride must be at least 1".into()));
        }
        if !(0.0..=0.2).contains(&c.hysteresis_margin) {
            return Err(Error::Config(format!("hysteresis_margin must be in [0, 0.2], got {}", c.hysteresis_margin)));
        }
        let substeps = self.timing.substeps()?;
        let samples = self.timing.samples()?;
        if self.timing.horizon < 20.0 / c.omega_n - 1e-12 {
            return Err(Error::Config(format!(
                "horizon {} s is shorter than 20/omega_n = {} s",
                self.timing.horizon,
                20.0 / c.omega_n
            )));
        }
        let d = &self.disturbance;
        if d.joints_deg.iter().any(|v| !v.is_finite()) || !(d.onset >= 0.0) {
            return Err(Error::Config(format!("invalid disturbance {d:?}")));
        }
        let v = &self.vision;
        if v.marker_radii.iter().any(|r| !(*r > 0.0)) || v.image_width < 16 || v.image_height < 16 {
            return Err(Error::Config(format!("invalid vision settings {v:?}")));
        }
        let start = match &self.start {
            StartSpec::Pose(p) => Start::Pose(p.to_transform()?),
            StartSpec::JointsDeg(q) => {
                if q.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Config("non-finite start joints".into()));
                }
                Start::Joints(JointAngles::from_fn(|i, _| q[i].to_radians()))
            }
        };
        Ok(ResolvedScenario {
            start,
            target: self.target.to_transform()?,
            disturbance: JointAngles::from_fn(|i, _| d.joints_deg[i].to_radians()),
            onset: d.onset,
            intrinsics: self.camera.intrinsics.resolve()?,
            camera: CameraPose::new(self.camera.pose.to_transform()?)?,
            outer,
            inner: c.inner_realization(),
            substeps,
            samples,
            true_geometry: self.true_geometry.resolve()?,
            model_geometry: self.model_geometry.resolve()?,
        })
    }
}
