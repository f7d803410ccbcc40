//! Closed-loop scenario runner, built-in scenarios, metrics and the
//! link-length robustness sweep.

pub mod config;
pub mod metrics;

use nalgebra::{Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::outer::LoopCheckRow;
use crate::control::{
    design_outer_bank, linearized_loop_check, realize_joint_loop, FeedforwardBlock, InnerLoopModel, Mode,
    OuterControllerBank, SupervisorState,
};
use crate::error::{Error, Result};
use crate::kinematics::{
    forward_kinematics, inverse_kinematics, inverse_kinematics_nearest_among, tool_points_base, HomTransform, IkBranch,
    JointAngles,
};
use crate::servo::{estimate_features, features_of_joints, inverse_features, jacobian, ObservedFeatures, ServoPlant};
use crate::stereo::FeatureVector;
use crate::vision::{extract_feature_vector, render_stereo, Marker};

pub use config::{ResolvedScenario, ScenarioConfig, Start, StartSpec, VisionMode};
pub use metrics::{compute_metrics, Metrics};

/// State of the loop at one control sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    /// Reference applied over the following control interval.
    pub q_ref: JointAngles,
    pub q_t: JointAngles,
    pub q_tbar: JointAngles,
    /// Joint estimate used as the linearization point.
    pub q_est: JointAngles,
    /// Actual end-effector pose (true geometry at `q_tbar`).
    pub pose: HomTransform,
    pub measured: Option<FeatureVector>,
    pub estimated: FeatureVector,
    pub used: FeatureVector,
    pub mode: Mode,
    pub active_channels: usize,
    pub sigma: Vector6<f64>,
}

impl LogRow {
    pub fn position(&self) -> Vector3<f64> {
        self.pose.translation()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub dt_ctrl: f64,
    pub rows: Vec<LogRow>,
}

fn pose(position: [f64; 3], n: [f64; 3], s: [f64; 3], a: [f64; 3]) -> config::PoseSpec {
    config::PoseSpec { position, n, s, a }
}

/// Shared goal: tool pointing straight down at `[-1, 0.2, 0.3]` m.
pub fn builtin_target() -> config::PoseSpec {
    pose([-1.0, 0.2, 0.3], [0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0])
}

/// Joint disturbance of scenarios 1 and 3, degrees.
pub const BUILTIN_DISTURBANCE_DEG: [f64; 6] = [0.1, 0.5, 0.2, 0.3, -0.1, 0.3];

/// Scenario 1 (in view, disturbed), 2 (out of view), 3 (out of view, disturbed).
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    let in_view_start =
        pose([1.404, 0.228, 1.171], [-0.4893, -0.0262, 0.8717], [0.2427, 0.9560, 0.1650], [-0.8377, 0.2932, -0.4614]);
    let out_of_view_start = pose([1.285, 0.0, 1.57], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]);
    let disturbed = config::DisturbanceSpec { joints_deg: BUILTIN_DISTURBANCE_DEG, onset: 0.0 };
    let base = |name: &str, start, disturbance| ScenarioConfig {
        name: name.to_string(),
        start: StartSpec::Pose(start),
        target: builtin_target(),
        disturbance,
        camera: Default::default(),
        control: Default::default(),
        timing: Default::default(),
        vision: Default::default(),
        true_geometry: Default::default(),
        model_geometry: Default::default(),
        seed: 0,
    };
    vec![
        base("scenario-1", in_view_start, disturbed),
        base("scenario-2", out_of_view_start, Default::default()),
        base("scenario-3", out_of_view_start, disturbed),
    ]
}

/// Built-in scenario by 1-based number.
pub fn builtin_scenario(id: usize) -> Option<ScenarioConfig> {
    builtin_scenarios().into_iter().nth(id.checked_sub(1)?)
}

/// Branch used to turn a start pose into joint angles.
pub const START_BRANCH: IkBranch = IkBranch {
    shoulder: crate::kinematics::Shoulder::Front,
    elbow: crate::kinematics::Elbow::Up,
    wrist: crate::kinematics::Wrist::A,
};

/// Initial joint angles. A start pose is converted with the model geometry,
/// so a mismatched robot starts from the same joints rather than the same pose.
pub fn start_joints(sc: &ResolvedScenario) -> Result<JointAngles> {
    match sc.start {
        Start::Joints(q) => Ok(q),
        Start::Pose(t) => Ok(inverse_kinematics(&sc.model_geometry, &t, START_BRANCH, None)?.q),
    }
}

/// Feedforward target: model IK of the goal nearest `q_start`. A start given
/// as a pose keeps its shoulder and elbow branch; only the wrist may flip.
pub fn target_joints(sc: &ResolvedScenario, q_start: &JointAngles) -> Result<JointAngles> {
    let branches: Vec<IkBranch> = match sc.start {
        Start::Pose(_) => IkBranch::ALL
            .into_iter()
            .filter(|b| b.shoulder == START_BRANCH.shoulder && b.elbow == START_BRANCH.elbow)
            .collect(),
        Start::Joints(_) => IkBranch::ALL.to_vec(),
    };
    Ok(inverse_kinematics_nearest_among(&sc.model_geometry, &sc.target, q_start, &branches)?.q)
}

fn plants(sc: &ResolvedScenario) -> (ServoPlant, ServoPlant) {
    let mk = |geometry| ServoPlant { geometry, intrinsics: sc.intrinsics, camera: sc.camera };
    (mk(sc.true_geometry), mk(sc.model_geometry))
}

/// Per-marker visibility of the start configuration on the true robot.
pub fn start_visibility(cfg: &ScenarioConfig) -> Result<[bool; 2]> {
    let sc = cfg.resolve()?;
    let (truth, _) = plants(&sc);
    Ok(features_of_joints(&truth, &start_joints(&sc)?).in_view)
}

fn measure(
    cfg: &ScenarioConfig,
    sc: &ResolvedScenario,
    truth: &ServoPlant,
    q: &JointAngles,
) -> Result<Option<ObservedFeatures>> {
    match cfg.vision.mode {
        VisionMode::Ideal => Ok(Some(features_of_joints(truth, q))),
        VisionMode::Hough => {
            let (p1, p2) = tool_points_base(&truth.geometry, q);
            let markers = [
                Marker { position: p1, radius: cfg.vision.marker_radii[0] },
                Marker { position: p2, radius: cfg.vision.marker_radii[1] },
            ];
            let pmap = cfg.vision.pixel_map(&sc.intrinsics);
            let (left, right) = match render_stereo(&markers, &truth.camera, &sc.intrinsics, &pmap) {
                Ok(imgs) => imgs,
                Err(Error::MarkerOutOfView { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            match extract_feature_vector(&left, &right, &cfg.vision.hough.params(), &pmap, &sc.intrinsics) {
                Ok(features) => Ok(Some(ObservedFeatures { features, in_view: [true; 2], physical: [true; 2] })),
                Err(Error::FeatureLoss(_)) => Ok(None),
                Err(e) => Err(e),
            }
        }
    }
}

/// Runs one scenario to the end of its horizon.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(TrajectoryLog, Metrics)> {
    let sc = cfg.resolve()?;
    let (truth, model) = plants(&sc);
    let q_start = start_joints(&sc)?;
    let q_goal = target_joints(&sc, &q_start)?;
    let p_goal = estimate_features(&model, &q_goal)?;

    let dt_ctrl = cfg.timing.dt_ctrl;
    let dt_sim = dt_ctrl / sc.substeps as f64;
    let mut inner = InnerLoopModel::new(sc.outer.tau_in, sc.inner)?;
    inner.initialize_at(&q_start)?;
    let mut ff = FeedforwardBlock::new(sc.outer.tau_in, &q_start, q_goal)?;
    let mut sup = SupervisorState::new(cfg.control.hysteresis_margin)?;
    let mut bank: Option<OuterControllerBank> = None;
    let mut q_est = q_start;
    let disturbance_at = |t: f64| {
        if t >= sc.onset - 1e-12 {
            sc.disturbance
        } else {
            JointAngles::zeros()
        }
    };

    let mut rows = Vec::with_capacity(sc.samples + 1);
    for k in 0..=sc.samples {
        let t = k as f64 * dt_ctrl;
        let step = |inner: &mut InnerLoopModel,
                    ff: &mut FeedforwardBlock,
                    sup: &mut SupervisorState,
                    bank: &mut Option<OuterControllerBank>,
                    q_est: &mut JointAngles|
         -> Result<LogRow> {
            let q_t = inner.output();
            let q_tbar = q_t + disturbance_at(t);
            let measured = measure(cfg, &sc, &truth, &q_tbar)?;
            let estimated = estimate_features(&model, &q_t)?;
            let (used, mode) = sup.select(&sc.intrinsics, measured.as_ref(), &estimated);
            *q_est = match mode {
                Mode::Measured => inverse_features(&model, &used, q_est)?,
                Mode::Estimated => q_t,
            };
            if bank.is_none() || k % cfg.control.adaptation_stride == 0 {
                let lin = jacobian(&model, q_est)?;
                *bank = Some(design_outer_bank(&lin, &sc.outer, bank.as_ref())?);
            }
            let b = bank.as_mut().expect("designed above");
            let u_fb = if cfg.control.feedback {
                b.step(&FeatureVector(p_goal.0 - used.0), dt_ctrl)?
            } else {
                JointAngles::zeros()
            };
            let row = LogRow {
                t,
                q_ref: ff.output() + u_fb,
                q_t,
                q_tbar,
                q_est: *q_est,
                pose: forward_kinematics(&truth.geometry, &q_tbar),
                measured: measured.map(|m| m.features),
                estimated,
                used,
                mode,
                active_channels: b.active_count(),
                sigma: b.sigma,
            };
            if k < sc.samples {
                for j in 0..sc.substeps {
                    let q_ref = ff.step(dt_sim)? + u_fb;
                    let ts = t + j as f64 * dt_sim;
                    inner.step(&q_ref, &disturbance_at(ts), dt_sim)?;
                }
            }
            Ok(row)
        };
        let row = step(&mut inner, &mut ff, &mut sup, &mut bank, &mut q_est)
            .map_err(|e| Error::Aborted { sample: k, source: Box::new(e) })?;
        rows.push(row);
    }
    let log = TrajectoryLog { dt_ctrl, rows };
    let metrics = compute_metrics(&log, &sc.target);
    Ok((log, metrics))
}

/// Frozen linearized loop at the goal joints compared with the Butterworth
/// target at each frequency.
pub fn lin_check(cfg: &ScenarioConfig, omegas: &[f64]) -> Result<Vec<LoopCheckRow>> {
    let sc = cfg.resolve()?;
    let (_, model) = plants(&sc);
    let q_goal = target_joints(&sc, &start_joints(&sc)?)?;
    let lin = jacobian(&model, &q_goal)?;
    let bank = design_outer_bank(&lin, &sc.outer, None)?;
    let inner = realize_joint_loop(sc.outer.tau_in, sc.inner)?;
    linearized_loop_check(&lin, &inner, &bank, omegas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    L2,
    L4,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::L2 => "L2",
            SweepParam::L4 => "L4",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L2" | "l2" => Ok(SweepParam::L2),
            "L4" | "l4" => Ok(SweepParam::L4),
            _ => Err(Error::Config(format!("unknown sweep parameter {s:?} (expected L2 or L4)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub fraction: f64,
    /// Steady-state X error as a percentage of `|x_target|`.
    pub error_pct: Option<f64>,
    pub steady_state_x_error: Option<f64>,
    pub settling_time: Option<f64>,
    pub failure: Option<String>,
}

/// `from, from + step, ..., to` (inclusive, count rounded).
pub fn sweep_fractions(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && from.is_finite() && to.is_finite() && to >= from && from > 0.0) {
        return Err(Error::Config(format!("bad sweep range {from}..{to} step {step}")));
    }
    let n = ((to - from) / step).round() as usize + 1;
    Ok((0..n).map(|i| ((from + i as f64 * step) * 1e9).round() / 1e9).collect())
}

/// Scales one true link length by each fraction while the controller keeps
/// the nominal model. Points run in parallel; row order follows `fractions`.
pub fn robustness_sweep(base: &ScenarioConfig, param: SweepParam, fractions: &[f64]) -> Vec<SweepRow> {
    fractions
        .par_iter()
        .map(|&fraction| {
            let mut cfg = base.clone();
            match param {
                SweepParam::L2 => cfg.true_geometry.l2 = base.model_geometry.l2 * fraction,
                SweepParam::L4 => cfg.true_geometry.l4 = base.model_geometry.l4 * fraction,
            }
            let outcome = run_scenario(&cfg).map(|(_, m)| m);
            match outcome {
                Ok(m) => {
                    let x_ref = base.target.position[0].abs().max(f64::MIN_POSITIVE);
                    SweepRow {
                        param,
                        fraction,
                        error_pct: Some(100.0 * m.steady_state_error[0] / x_ref),
                        steady_state_x_error: Some(m.steady_state_error[0]),
                        settling_time: m.settling_time,
                        failure: None,
                    }
                }
                Err(e) => SweepRow {
                    param,
                    fraction,
                    error_pct: None,
                    steady_state_x_error: None,
                    settling_time: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect()
}
