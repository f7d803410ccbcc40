//! Inner joint loop and SVD-decoupled outer controller design at the goal
//! configuration of scenario 1.

use ibvs::control::inner::inner_closed_loop;
use ibvs::control::outer::{butterworth_target, youla_channel};
use ibvs::control::{design_inner_controller, design_outer_bank, InnerControllerVariant};
use ibvs::servo::{jacobian, ServoPlant};
use ibvs::sim::{builtin_scenario, start_joints, target_joints};
use num_complex::Complex64;

fn main() -> anyhow::Result<()> {
    let cfg = builtin_scenario(1).expect("built-in scenario");
    let sc = cfg.resolve()?;
    let p = sc.outer;

    let c_in = design_inner_controller(p.tau_in, InnerControllerVariant::Corrected)?;
    println!("inner controller num {:?} den {:?}", c_in.num(), c_in.den());
    let t_in = inner_closed_loop(p.tau_in);
    println!("inner closed loop num {:?} den {:?}", t_in.num(), t_in.den());
    // step response 1 - e^-x (1 + x - x^2), x = t / tau
    let (mut peak, mut t_peak) = (0.0f64, 0.0);
    for k in 0..=1000 {
        let x = k as f64 * 0.01;
        let y = 1.0 - (-x).exp() * (1.0 + x - x * x);
        if y > peak {
            (peak, t_peak) = (y, x * p.tau_in);
        }
    }
    println!("inner step overshoot {:.1} % at {:.3} s", 100.0 * (peak - 1.0), t_peak);

    let plant = ServoPlant { geometry: sc.model_geometry, intrinsics: sc.intrinsics, camera: sc.camera };
    let q_goal = target_joints(&sc, &start_joints(&sc)?)?;
    let lin = jacobian(&plant, &q_goal)?;
    let bank = design_outer_bank(&lin, &p, None)?;
    let sv: Vec<String> = bank.sigma.iter().map(|s| format!("{s:.4e}")).collect();
    println!("\nsingular values {}", sv.join(" "));
    println!("active channels {:?}", bank.active);

    let m_t = butterworth_target(p.omega_n, p.zeta);
    println!("\nchannel  omega   |G_c|        Youla check");
    for i in (0..6).filter(|i| bank.active[*i]) {
        let g_c = bank.channel_transfer(i)?;
        let y = youla_channel(bank.sigma[i], &p)?;
        for omega in [0.1, 10.0, 100.0] {
            let direct = g_c.freq_response(omega)?;
            let via_youla = y.freq_response(omega)? / (Complex64::new(1.0, 0.0) - m_t.freq_response(omega)?);
            println!("{i:>7}  {omega:>5}   {:.4e}   {:.1e}", direct.norm(), ((direct - via_youla) / via_youla).norm());
        }
    }
    Ok(())
}
