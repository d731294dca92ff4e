//! Sampled checks of the structural inequalities on the nonlinearity for a
//! few couplings, with the smallness bound for cooperative ones.
//!
//! Usage: `cargo run --release --example assumption_check`.

use nehari::energy::{check_assumptions, Potential};

fn main() -> nehari::Result<()> {
    let cases = [
        ("cubic, beta = 0", Potential::cubic(vec![1.0, 1.0], vec![vec![0.0, 0.0], vec![0.0, 0.0]])?),
        ("cubic, beta = -1", Potential::cubic(vec![1.0, 1.0], vec![vec![0.0, -1.0], vec![-1.0, 0.0]])?),
        ("cubic, beta = +1", Potential::cubic(vec![1.0, 1.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]])?),
        ("pure power, p = 3", Potential::pure_power(vec![1.0, 2.0], 3.0)?),
    ];
    for (name, pot) in &cases {
        let rep = check_assumptions(pot, 10_000, 11);
        println!("{name}  (C_F = {}, delta = {})", pot.c_f(), pot.delta());
        for e in &rep.entries {
            println!(
                "  {:<6} {:<5} worst margin {:>11.3e}  at {:?}",
                e.name,
                if e.holds { "ok" } else { "FAIL" },
                e.worst_margin,
                e.witness
            );
        }
    }
    Ok(())
}
