//! Scales the true upper-arm (L2) and forearm (L4) lengths from 50% to 110%
//! while the controller keeps the nominal model, and prints the steady-state
//! X error for each point.

use std::time::Instant;

use ibvs::sim::{builtin_scenario, robustness_sweep, sweep_fractions, SweepParam};

fn main() -> anyhow::Result<()> {
    let base = builtin_scenario(1).expect("scenario 1 exists");
    let fractions = sweep_fractions(0.5, 1.1, 0.05)?;
    for param in [SweepParam::L2, SweepParam::L4] {
        let started = Instant::now();
        let rows = robustness_sweep(&base, param, &fractions);
        println!("{} ({:.2?})", param.as_str(), started.elapsed());
        println!("  fraction  error %      settling s");
        for r in rows {
            match (r.error_pct, r.failure) {
                (Some(e), _) => println!(
                    "  {:>8.2}  {:<11.3e}  {}",
                    r.fraction,
                    e,
                    r.settling_time.map_or("-".to_string(), |t| format!("{t:.3}"))
                ),
                (None, f) => println!("  {:>8.2}  failed: {}", r.fraction, f.unwrap_or_default()),
            }
        }
    }
    Ok(())
}
