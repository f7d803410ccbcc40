//! Forward and inverse kinematics of the arm at the shared goal pose, plus
//! the singular values of the feature Jacobian there.

use ibvs::kinematics::{forward_kinematics, inverse_kinematics_all, wrist_center, RobotGeometry};
use ibvs::servo::{jacobian, ServoPlant};
use ibvs::sim::{builtin_scenario, start_joints, target_joints};

fn main() -> anyhow::Result<()> {
    let geom = RobotGeometry::default();
    let cfg = builtin_scenario(1).expect("built-in scenario");
    let sc = cfg.resolve()?;

    println!("goal position {:?}", cfg.target.position);
    println!("branch          q (deg)                                         FK residual");
    for (branch, sol) in inverse_kinematics_all(&geom, &sc.target, None) {
        let residual = (forward_kinematics(&geom, &sol.q).0 - sc.target.0).abs().max();
        let deg: Vec<String> = sol.q.iter().map(|v| format!("{:8.2}", v.to_degrees())).collect();
        let label = format!("{:?}/{:?}/{:?}", branch.shoulder, branch.elbow, branch.wrist);
        println!("{label:<14}{}  {residual:.1e}", deg.join(""));
    }

    let q_start = start_joints(&sc)?;
    let q_goal = target_joints(&sc, &q_start)?;
    println!("\nfeedforward target (deg) {:.2?}", q_goal.iter().map(|v| v.to_degrees()).collect::<Vec<_>>());
    println!("wrist center {:.4?}", wrist_center(&geom, &q_goal).as_slice());

    let plant = ServoPlant { geometry: sc.model_geometry, intrinsics: sc.intrinsics, camera: sc.camera };
    let lin = jacobian(&plant, &q_goal)?;
    let mut sv: Vec<f64> = lin.c1.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let sv: Vec<String> = sv.iter().map(|s| format!("{s:.3e}")).collect();
    println!("feature Jacobian singular values (mm/rad) {}", sv.join(" "));
    println!("column 6 norm {:.1e} (tool roll is invisible to two on-axis markers)", lin.c1.column(5).norm());
    Ok(())
}
