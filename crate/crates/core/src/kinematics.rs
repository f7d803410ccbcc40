//! Denavit–Hartenberg kinematics of an elbow manipulator with a spherical
//! wrist, with the tool-point placement and a closed-form inverse.
//!
//! Link `i` uses `A = Rot_z(theta) Trans_z(d) Trans_x(a) Rot_x(alpha)` with
//! `theta = q_i + theta_offset_i`. The nominal table is
//!
//! ```text
//! link  a    alpha   d    offset
//! 1     a1   -pi/2   L1   0
//! 2     L2    0      0   -pi/2
//! 3     L3   -pi/2   0    0
//! 4     0     pi/2   L4   0
//! 5     0    -pi/2   0    0
//! 6     0     0      Lt   pi
//! ```
//!
//! The wrist axes 4, 5, 6 intersect at the origin of frame 4, so joints 4..6
//! never move the wrist center.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4, Vector6};

use crate::error::{Error, Result};

/// Six joint rotations in radians.
pub type JointAngles = Vector6<f64>;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Returns `a + 2 pi k` closest to `reference`.
pub fn unwrap_near(a: f64, reference: f64) -> f64 {
    reference + wrap_angle(a - reference)
}

/// A 4x4 homogeneous rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomTransform(pub Matrix4<f64>);

impl HomTransform {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn from_parts(rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(translation);
        Self(m)
    }

    /// Builds a transform from the orientation columns `n`, `s`, `a` and a position.
    pub fn from_columns(n: Vector3<f64>, s: Vector3<f64>, a: Vector3<f64>, p: Vector3<f64>) -> Self {
        Self::from_parts(&Matrix3::from_columns(&[n, s, a]), &p)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn n(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 0).into_owned()
    }

    pub fn s(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 1).into_owned()
    }

    pub fn a(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 2).into_owned()
    }

    /// Rigid inverse `[R^T, -R^T t]`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation().transpose();
        Self::from_parts(&rt, &(-rt * self.translation()))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let h = self.0 * Vector4::new(p.x, p.y, p.z, 1.0);
        Vector3::new(h.x, h.y, h.z)
    }

    /// Maximum deviation of the rotation block from orthonormality with
    /// determinant +1, and of the bottom row from `[0 0 0 1]`.
    pub fn rigidity_error(&self) -> f64 {
        let r = self.rotation();
        let ortho = (r.transpose() * r - Matrix3::identity()).amax();
        let det = (r.determinant() - 1.0).abs();
        let row = (self.0.row(3) - Vector4::new(0.0, 0.0, 0.0, 1.0).transpose()).amax();
        ortho.max(det).max(row)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.0 - other.0).amax()
    }
}

impl Mul for HomTransform {
    type Output = HomTransform;

    fn mul(self, rhs: HomTransform) -> HomTransform {
        HomTransform(self.0 * rhs.0)
    }
}

/// One Denavit–Hartenberg row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    pub theta_offset: f64,
}

/// Link dimensions (meters) and joint offsets (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotGeometry {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub a1: f64,
    pub lt: f64,
    /// Screwdriver length; the second marker sits at half of it along z6.
    pub l_tool: f64,
    pub theta_offsets: [f64; 6],
}

impl Default for RobotGeometry {
    /// ABB IRB 4600 dimensions with a 0.127 m screwdriver.
    fn default() -> Self {
        Self {
            l1: 0.495,
            l2: 0.9,
            l3: 0.175,
            l4: 0.96,
            a1: 0.175,
            lt: 0.135,
            l_tool: 0.127,
            theta_offsets: [0.0, -FRAC_PI_2, 0.0, 0.0, 0.0, PI],
        }
    }
}

impl RobotGeometry {
    pub fn validate(&self) -> Result<()> {
        let lengths = [self.l1, self.l2, self.l3, self.l4, self.a1, self.lt, self.l_tool];
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config(format!("robot lengths must be positive: {lengths:?}")));
        }
        if self.theta_offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::Config("non-finite joint offset".into()));
        }
        Ok(())
    }

    pub fn dh_rows(&self) -> [DhRow; 6] {
        let o = self.theta_offsets;
        [
            DhRow { a: self.a1, alpha: -FRAC_PI_2, d: self.l1, theta_offset: o[0] },
            DhRow { a: self.l2, alpha: 0.0, d: 0.0, theta_offset: o[1] },
            DhRow { a: self.l3, alpha: -FRAC_PI_2, d: 0.0, theta_offset: o[2] },
            DhRow { a: 0.0, alpha: FRAC_PI_2, d: self.l4, theta_offset: o[3] },
            DhRow { a: 0.0, alpha: -FRAC_PI_2, d: 0.0, theta_offset: o[4] },
            DhRow { a: 0.0, alpha: 0.0, d: self.lt, theta_offset: o[5] },
        ]
    }

    /// Length of the rigid elbow-to-wrist segment `sqrt(L3^2 + L4^2)`.
    pub fn forearm(&self) -> f64 {
        self.l3.hypot(self.l4)
    }

    /// Upper bound on the distance of the tool flange from the base origin.
    pub fn max_reach(&self) -> f64 {
        self.a1 + self.l2 + self.forearm() + self.lt
    }
}

/// Link transform for joint variable `theta_star` (offset applied here).
pub fn dh_transform(row: &DhRow, theta_star: f64) -> HomTransform {
    let theta = theta_star + row.theta_offset;
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    HomTransform(Matrix4::new(
        ct,
        -st * ca,
        st * sa,
        row.a * ct,
        st,
        ct * ca,
        -ct * sa,
        row.a * st,
        0.0,
        sa,
        ca,
        row.d,
        0.0,
        0.0,
        0.0,
        1.0,
    ))
}

/// Transform of frame `k` in the base frame (`k = 0..=6`).
pub fn partial_chain(geom: &RobotGeometry, q: &JointAngles, k: usize) -> HomTransform {
    geom.dh_rows()
        .iter()
        .zip(q.iter())
        .take(k)
        .fold(HomTransform::identity(), |acc, (row, qi)| acc * dh_transform(row, *qi))
}

/// End-effector pose `T_E^O`.
pub fn forward_kinematics(geom: &RobotGeometry, q: &JointAngles) -> HomTransform {
    partial_chain(geom, q, 6)
}

/// Marker positions in the base frame: the flange origin and the point
/// `L_tool / 2` along z6.
pub fn tool_points_base(geom: &RobotGeometry, q: &JointAngles) -> (Vector3<f64>, Vector3<f64>) {
    let t = forward_kinematics(geom, q);
    (t.transform_point(&Vector3::zeros()), t.transform_point(&Vector3::new(0.0, 0.0, geom.l_tool / 2.0)))
}

/// Intersection of the three wrist axes (origin of frame 4).
pub fn wrist_center(geom: &RobotGeometry, q: &JointAngles) -> Vector3<f64> {
    partial_chain(geom, q, 4).translation()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Shoulder {
    /// Joint 1 faces the wrist center.
    #[default]
    Front,
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Elbow {
    /// Elbow angle `theta3 + atan2(L4, L3)` non-negative (the zero-pose side).
    #[default]
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Wrist {
    /// `sin theta5 >= 0`.
    #[default]
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct IkBranch {
    pub shoulder: Shoulder,
    pub elbow: Elbow,
    pub wrist: Wrist,
}

impl IkBranch {
    pub const ALL: [IkBranch; 8] = {
        let mut out = [IkBranch { shoulder: Shoulder::Front, elbow: Elbow::Up, wrist: Wrist::A }; 8];
        let mut i = 0;
        while i < 8 {
            out[i] = IkBranch {
                shoulder: if i & 4 == 0 { Shoulder::Front } else { Shoulder::Back },
                elbow: if i & 2 == 0 { Elbow::Up } else { Elbow::Down },
                wrist: if i & 1 == 0 { Wrist::A } else { Wrist::B },
            };
            i += 1;
        }
        out
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: JointAngles,
    /// `|sin theta5|` fell below 1e-9; joint 4 was taken from the hint.
    pub wrist_singular: bool,
}

const WRIST_SINGULAR_EPS: f64 = 1e-9;

/// Closed-form inverse kinematics for one branch.
///
/// `q4_hint` is used for joint 4 at a wrist singularity (0 if `None`), and the
/// remaining wrist rotation is folded into joint 6. Angles are wrapped to
/// `(-pi, pi]`.
pub fn inverse_kinematics(
    geom: &RobotGeometry,
    target: &HomTransform,
    branch: IkBranch,
    q4_hint: Option<f64>,
) -> Result<IkSolution> {
    if target.rigidity_error() > 1e-9 {
        return Err(Error::Config("IK target is not a rigid transform".into()));
    }
    let off = geom.theta_offsets;
    let wc = target.translation() - geom.lt * target.a();

    let radial = wc.x.hypot(wc.y);
    let base_heading = wc.y.atan2(wc.x);
    let (theta1, rho) = match branch.shoulder {
        Shoulder::Front => (base_heading, radial - geom.a1),
        Shoulder::Back => (base_heading + PI, -radial - geom.a1),
    };
    // Frame-1 planar coordinates; its y axis points along -Z0.
    let wx = rho;
    let wy = -(wc.z - geom.l1);
    let dist = wx.hypot(wy);
    let forearm = geom.forearm();
    let phi = geom.l4.atan2(geom.l3);
    let cos_psi = (dist * dist - geom.l2 * geom.l2 - forearm * forearm) / (2.0 * geom.l2 * forearm);
    if cos_psi.abs() > 1.0 + 1e-12 || !cos_psi.is_finite() {
        return Err(Error::OutOfWorkspace { distance: dist, min: (geom.l2 - forearm).abs(), max: geom.l2 + forearm });
    }
    let psi_mag = cos_psi.clamp(-1.0, 1.0).acos();
    let psi = match branch.elbow {
        Elbow::Up => psi_mag,
        Elbow::Down => -psi_mag,
    };
    let theta2 = wy.atan2(wx) - (forearm * psi.sin()).atan2(geom.l2 + forearm * psi.cos());
    let theta3 = psi - phi;

    let mut q = JointAngles::zeros();
    q[0] = theta1 - off[0];
    q[1] = theta2 - off[1];
    q[2] = theta3 - off[2];

    let r03 = partial_chain(geom, &q, 3).rotation();
    let r36 = r03.transpose() * target.rotation();
    let s5_mag = r36[(0, 2)].hypot(r36[(1, 2)]);
    let wrist_singular = s5_mag < WRIST_SINGULAR_EPS;
    let (theta4, theta5) = if wrist_singular {
        let t4 = q4_hint.unwrap_or(0.0) + off[3];
        (t4, 0.0_f64.atan2(r36[(2, 2)]))
    } else {
        let s5 = match branch.wrist {
            Wrist::A => s5_mag,
            Wrist::B => -s5_mag,
        };
        ((-r36[(1, 2)] / s5).atan2(-r36[(0, 2)] / s5), s5.atan2(r36[(2, 2)]))
    };
    q[3] = theta4 - off[3];
    q[4] = theta5 - off[4];
    let r35 = partial_chain_rot(geom, 3, 5, &q);
    let m = r35.transpose() * r36;
    let theta6 = m[(1, 0)].atan2(m[(0, 0)]);
    q[5] = theta6 - off[5];

    let q = q.map(wrap_angle);
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("inverse kinematics".into()));
    }
    Ok(IkSolution { q, wrist_singular })
}

fn partial_chain_rot(geom: &RobotGeometry, from: usize, to: usize, q: &JointAngles) -> Matrix3<f64> {
    let rows = geom.dh_rows();
    (from..to).fold(HomTransform::identity(), |acc, i| acc * dh_transform(&rows[i], q[i])).rotation()
}

/// All reachable branches.
pub fn inverse_kinematics_all(
    geom: &RobotGeometry,
    target: &HomTransform,
    q4_hint: Option<f64>,
) -> Vec<(IkBranch, IkSolution)> {
    IkBranch::ALL.iter().filter_map(|b| inverse_kinematics(geom, target, *b, q4_hint).ok().map(|s| (*b, s))).collect()
}

/// Solution closest to `hint` (wrapped joint distance), unwrapped so each
/// joint lies within pi of the hint.
pub fn inverse_kinematics_nearest(
    geom: &RobotGeometry,
    target: &HomTransform,
    hint: &JointAngles,
) -> Result<IkSolution> {
    inverse_kinematics_nearest_among(geom, target, hint, &IkBranch::ALL)
}

/// [`inverse_kinematics_nearest`] restricted to `branches`.
pub fn inverse_kinematics_nearest_among(
    geom: &RobotGeometry,
    target: &HomTransform,
    hint: &JointAngles,
    branches: &[IkBranch],
) -> Result<IkSolution> {
    let mut best: Option<(f64, IkSolution)> = None;
    let mut last_err = None;
    for b in branches {
        match inverse_kinematics(geom, target, *b, Some(hint[3])) {
            Ok(sol) => {
                let q = JointAngles::from_fn(|i, _| unwrap_near(sol.q[i], hint[i]));
                let cost = (q - hint).norm_squared();
                if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                    best = Some((cost, IkSolution { q, ..sol }));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.map(|(_, s)| s).ok_or_else(|| last_err.unwrap_or_else(|| Error::Config("no IK branch".into())))
}
