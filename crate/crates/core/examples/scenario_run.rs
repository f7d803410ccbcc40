//! Runs the built-in scenarios and prints their step-response metrics.
//!
//! ```text
//! cargo run --example scenario_run [-- 1|2|3]
//! ```

use std::time::Instant;

use ibvs::sim::{builtin_scenario, builtin_scenarios, run_scenario};

fn main() -> anyhow::Result<()> {
    let picks: Vec<usize> = match std::env::args().nth(1) {
        Some(a) => vec![a.parse()?],
        None => (1..=builtin_scenarios().len()).collect(),
    };
    for id in picks {
        let cfg = builtin_scenario(id).ok_or_else(|| anyhow::anyhow!("no scenario {id}"))?;
        let started = Instant::now();
        let (log, m) = run_scenario(&cfg)?;
        let last = log.rows.last().expect("non-empty log");
        println!("{} ({} samples, {:.2?})", cfg.name, log.rows.len(), started.elapsed());
        match m.settling_time {
            Some(t) => println!("  settling time      {t:.3} s"),
            None => println!("  settling time      not settled"),
        }
        println!(
            "  steady-state error {:.3e} {:.3e} {:.3e} m",
            m.steady_state_error[0], m.steady_state_error[1], m.steady_state_error[2]
        );
        println!("  overshoot          {:.1} {:.1} {:.1} %", m.overshoot[0], m.overshoot[1], m.overshoot[2]);
        println!(
            "  estimated mode     {:.3} s ({} -> {}, {} transitions)",
            m.time_in_estimated_mode, m.initial_mode, m.final_mode, m.mode_transitions
        );
        println!("  max orientation    {:.4} rad", m.max_orientation_error);
        let p = last.position();
        println!("  final position     [{:.5}, {:.5}, {:.5}]", p.x, p.y, p.z);
    }
    Ok(())
}
