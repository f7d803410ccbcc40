use std::f64::consts::PI;

use nalgebra::{Matrix6, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;

use ibvs::control::outer::{butterworth_target, channel_controller, youla_channel, OuterParams};
use ibvs::control::{Mode, SupervisorState};
use ibvs::kinematics::{
    forward_kinematics, inverse_kinematics_all, tool_points_base, wrap_angle, wrist_center, JointAngles, RobotGeometry,
};
use ibvs::lti::{poly_mul, svd6, RationalSiso};
use ibvs::servo::{features_of_joints, jacobian, jacobian_with_step, ObservedFeatures, ServoPlant};
use ibvs::sim::builtin_scenario;
use ibvs::stereo::{point_within, project, triangulate, CameraIntrinsics, FeatureVector, ImagePoint};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn builtin_plant() -> ServoPlant {
    let sc = builtin_scenario(1).unwrap().resolve().unwrap();
    ServoPlant { geometry: sc.model_geometry, intrinsics: sc.intrinsics, camera: sc.camera }
}

/// Stable denominator from real poles and complex pairs, plus a numerator of
/// degree at most the denominator's.
fn stable_tf() -> impl Strategy<Value = RationalSiso> {
    (
        1usize..=4,
        prop::collection::vec(0.1f64..20.0, 4),
        prop::collection::vec(0.2f64..10.0, 2),
        prop::collection::vec(-5.0f64..5.0, 5),
        0usize..=4,
    )
        .prop_map(|(n, re, im, num, num_deg)| {
            let mut den = vec![1.0];
            let mut k = 0;
            while den.len() - 1 < n {
                if n - (den.len() - 1) >= 2 && k < 2 {
                    // (s + a)^2 + b^2
                    den = poly_mul(&den, &[re[k] * re[k] + im[k] * im[k], 2.0 * re[k], 1.0]);
                } else {
                    den = poly_mul(&den, &[re[k], 1.0]);
                }
                k += 1;
            }
            let deg = num_deg.min(n);
            RationalSiso::new(num[..=deg].to_vec(), den).unwrap()
        })
}

fn matrix6() -> impl Strategy<Value = Matrix6<f64>> {
    (prop::collection::vec(-10.0f64..10.0, 36), 0usize..=6, prop::collection::vec(0usize..6, 3)).prop_map(
        |(vals, rank, pick)| {
            let m = Matrix6::from_iterator(vals);
            match rank {
                // zero column
                0 => {
                    let mut m = m;
                    m.column_mut(pick[0]).fill(0.0);
                    m
                }
                // duplicated column
                1 => {
                    let mut m = m;
                    let c = m.column(pick[1]).into_owned();
                    m.set_column((pick[1] + 1) % 6, &(c * 2.0));
                    m
                }
                // rank <= 2 outer product pair
                2 => m.column(0) * m.row(1) + m.column(2) * m.row(3),
                _ => m,
            }
        },
    )
}

fn joints() -> impl Strategy<Value = JointAngles> {
    (-PI..PI, -1.0f64..1.2, -1.5f64..1.0, -PI..PI, 0.2f64..2.8, any::<bool>(), -PI..PI)
        .prop_map(|(q1, q2, q3, q4, q5, flip, q6)| JointAngles::new(q1, q2, q3, q4, if flip { -q5 } else { q5 }, q6))
}

fn away_from_arm_singularities(g: &RobotGeometry, q: &JointAngles) -> bool {
    let wc = wrist_center(g, q);
    let shoulder = Vector3::new(g.a1 * q[0].cos(), g.a1 * q[0].sin(), g.l1);
    let d = (wc - shoulder).norm();
    let radial = wc.x.hypot(wc.y);
    d < g.l2 + g.forearm() - 0.02 && d > (g.l2 - g.forearm()).abs() + 0.02 && radial > 0.1
}

/// Joints that keep both markers well in front of the built-in camera.
fn workspace_joints() -> impl Strategy<Value = JointAngles> {
    (2.6f64..3.6, 0.0f64..0.8, -0.3f64..0.9, -1.0f64..1.0, 0.3f64..1.5, -PI..PI)
        .prop_map(|(q1, q2, q3, q4, q5, q6)| JointAngles::new(q1, q2, q3, q4, q5, q6))
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn realization_matches_transfer_function(tf in stable_tf()) {
        let blk = tf.realize();
        prop_assert_eq!(blk.order(), tf.order());
        for k in 0..20 {
            let w = 10f64.powf(-2.0 + 5.0 * k as f64 / 19.0);
            let a = tf.freq_response(w).unwrap();
            let b = blk.freq_response(w).unwrap();
            prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1e-12), "w {} tf {} block {}", w, a, b);
        }
    }

    #[test]
    fn wrist_center_ignores_wrist_joints(q in joints(), d in prop::array::uniform3(-PI..PI)) {
        let g = RobotGeometry::default();
        let mut q2 = q;
        q2[3] += d[0];
        q2[4] += d[1];
        q2[5] += d[2];
        prop_assert!((wrist_center(&g, &q) - wrist_center(&g, &q2)).norm() < 1e-10);
    }

    #[test]
    fn tool_points_are_rigid(q in joints()) {
        let g = RobotGeometry::default();
        let (p1, p2) = tool_points_base(&g, &q);
        let t = forward_kinematics(&g, &q);
        prop_assert!(((p2 - p1).norm() - g.l_tool / 2.0).abs() < 1e-12);
        prop_assert!((p1 - t.translation()).norm() < 1e-15);
        prop_assert!(((p2 - p1) / (g.l_tool / 2.0) - t.a()).norm() < 1e-12);
        prop_assert!(t.rigidity_error() < 1e-9);
    }

    #[test]
    fn features_ignore_tool_roll(q in workspace_joints(), roll in -PI..PI) {
        let plant = builtin_plant();
        let mut q2 = q;
        q2[5] += roll;
        let a = features_of_joints(&plant, &q).features.0;
        let b = features_of_joints(&plant, &q2).features.0;
        prop_assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn youla_closed_form(
        sigma in 1e-3f64..1e2,
        omega_n in 0.5f64..40.0,
        zeta in 0.3f64..1.5,
        tau_frac in 0.01f64..0.9,
    ) {
        let p = OuterParams { omega_n, zeta, tau_in: tau_frac / omega_n, sigma_tol: 1e-6 };
        let g = channel_controller(sigma, &p).unwrap();
        let y = youla_channel(sigma, &p).unwrap();
        let m_t = butterworth_target(omega_n, zeta);
        for k in 0..30 {
            let w = 10f64.powf(-2.0 + 5.0 * k as f64 / 29.0);
            let direct = g.freq_response(w).unwrap();
            let youla = y.freq_response(w).unwrap() / (Complex64::new(1.0, 0.0) - m_t.freq_response(w).unwrap());
            prop_assert!((direct - youla).norm() <= 1e-9 * youla.norm());
        }
    }

    #[test]
    fn jacobian_structure(q in workspace_joints()) {
        let plant = builtin_plant();
        let lin = jacobian(&plant, &q).unwrap();
        prop_assert_eq!(lin.c2, features_of_joints(&plant, &q).features);
        let scale = lin.c1.amax();
        prop_assert!(lin.c1.column(5).amax() < 1e-6 * scale.max(1.0));
        let s = svd6(&lin.c1).unwrap();
        prop_assert!(s.sigma[5] < 1e-6 * s.sigma[0]);
    }

    #[test]
    fn supervisor_hysteresis(vs in prop::collection::vec((-1.7f64..1.7, any::<bool>()), 1..60), margin in 0.0f64..0.2) {
        let intr = CameraIntrinsics::default();
        let estimated = FeatureVector::from_points(
            ImagePoint { ul: -0.1, ur: 0.1, v: 0.0 },
            ImagePoint { ul: -0.1, ur: 0.1, v: 0.0 },
        );
        let mut sup = SupervisorState::new(margin).unwrap();
        let mut transitions = 0;
        for (v, seen) in vs {
            let p = ImagePoint { ul: -0.1, ur: 0.1, v };
            let in_view = seen && point_within(&intr, &p, 0.0);
            let obs = ObservedFeatures {
                features: FeatureVector::from_points(p, p),
                in_view: [in_view; 2],
                physical: [true; 2],
            };
            let before = sup.mode;
            let (used, mode) = sup.select(&intr, seen.then_some(&obs), &estimated);
            if mode != before {
                transitions += 1;
            }
            match mode {
                Mode::Measured => {
                    prop_assert!(in_view);
                    prop_assert_eq!(used, obs.features);
                    // entering requires clearing the margin
                    if before == Mode::Estimated {
                        prop_assert!(point_within(&intr, &p, margin));
                    }
                }
                Mode::Estimated => {
                    prop_assert_eq!(used, estimated);
                    // once measured, only loss of view switches back
                    if before == Mode::Measured {
                        prop_assert!(!in_view);
                    }
                }
            }
        }
        prop_assert_eq!(sup.transitions, transitions);
    }
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn svd_invariants(m in matrix6()) {
        let s = svd6(&m).unwrap();
        let eye = Matrix6::identity();
        prop_assert!((s.u.transpose() * s.u - eye).amax() < 1e-10);
        prop_assert!((s.v.transpose() * s.v - eye).amax() < 1e-10);
        prop_assert!((s.reconstruct() - m).amax() < 1e-8 * m.amax().max(1.0));
        for i in 0..6 {
            prop_assert!(s.sigma[i] >= 0.0);
            if i > 0 {
                prop_assert!(s.sigma[i - 1] >= s.sigma[i]);
            }
            let col = s.u.column(i);
            let big = col.iter().fold(0.0f64, |b, v| if v.abs() > b.abs() { *v } else { b });
            prop_assert!(big >= 0.0);
        }
    }

    #[test]
    fn projection_round_trip(x in -3.0f64..3.0, y in -3.0f64..3.0, z in 0.2f64..5.0) {
        let intr = CameraIntrinsics::default();
        let p = Vector3::new(x, y, z);
        let ip = project(&intr, &p).unwrap();
        prop_assert!(ip.disparity() > 0.0);
        let back = triangulate(&intr, &ip).unwrap();
        prop_assert!((back - p).norm() < 1e-12);
        let further = project(&intr, &Vector3::new(x, y, z * 1.1)).unwrap();
        prop_assert!(further.disparity() < ip.disparity());
    }
}

proptest! {
    #![proptest_config(config(500))]

    #[test]
    fn ik_recovers_configuration(q in joints()) {
        let g = RobotGeometry::default();
        prop_assume!(away_from_arm_singularities(&g, &q));
        let t = forward_kinematics(&g, &q);
        let sols = inverse_kinematics_all(&g, &t, Some(q[3]));
        let best = sols
            .iter()
            .map(|(_, s)| (0..6).map(|i| wrap_angle(s.q[i] - q[i]).abs()).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(best < 1e-8, "best branch error {}", best);
        for (_, s) in &sols {
            prop_assert!((forward_kinematics(&g, &s.q).0 - t.0).amax() < 1e-8);
        }
    }
}

#[test]
fn jacobian_residual_is_second_order() {
    use rand::{Rng, SeedableRng};
    let plant = builtin_plant();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let q = JointAngles::from_fn(|i, _| {
            let (lo, hi) = [(2.6, 3.6), (0.0, 0.8), (-0.3, 0.9), (-1.0, 1.0), (0.3, 1.5), (-PI, PI)][i];
            rng.gen_range(lo..hi)
        });
        let d = JointAngles::from_fn(|_, _| rng.gen_range(-1.0..1.0)).normalize();
        let lin = jacobian_with_step(&plant, &q, 1e-6).unwrap();
        let f0 = features_of_joints(&plant, &q).features.0;
        let eps = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5];
        let pts: Vec<(f64, f64)> = eps
            .iter()
            .map(|e| {
                let f = features_of_joints(&plant, &(q + d * *e)).features.0;
                (e.ln(), (f - f0 - lin.c1 * d * *e).norm().ln())
            })
            .collect();
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((1.9..=2.1).contains(&slope), "slope {slope} at {q:?}");
    }
}
