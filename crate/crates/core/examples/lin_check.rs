//! Frozen linearized loop of each built-in scenario compared with the
//! second-order Butterworth target.

use ibvs::sim::{builtin_scenarios, lin_check};

fn main() -> anyhow::Result<()> {
    let omegas = [0.1, 1.0, 3.0, 10.0, 30.0, 100.0];
    for cfg in builtin_scenarios() {
        println!("{}", cfg.name);
        println!("  omega      |M_T|       |achieved|  phase err (deg)  rel error");
        for r in lin_check(&cfg, &omegas)? {
            println!(
                "  {:>6}  {:.6}    {:.6}    {:+.2e}        {:.2e}",
                r.omega,
                r.target.norm(),
                r.achieved.norm(),
                (r.achieved.arg() - r.target.arg()).to_degrees(),
                r.rel_error
            );
        }
    }
    Ok(())
}
