//! Multi-bump sweep on a two-chamber dumbbell: one run per choice of chamber
//! sets, then the distinct-solution count.
//!
//! Usage: `cargo run --release --example multibump_sweep [-- <k> <n> <width> <beta>]`
//! with `k` components, mesh width `1/n`, channel width `width`, and coupling
//! `beta` between all component pairs (defaults 1, 32, 0.1, -1).

use std::time::Instant;

use nehari::energy::Potential;
use nehari::experiments::{run_multiplicity, MultiplicityConfig};
use nehari::grid_domain::{GridDomain, Rect};

fn main() -> nehari::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let k = arg(0, 1.0) as usize;
    let n = arg(1, 32.0);
    let width = arg(2, 0.1);
    let beta = arg(3, -1.0);

    let dom = GridDomain::build_dumbbell(
        &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.5, 0.0, 2.5, 1.0)],
        &[Rect::new(1.0, 0.5 - width / 2.0, 1.5, 0.5 + width / 2.0)],
        1.0 / n,
    )?;
    let b: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 0.0 } else { beta }).collect())
        .collect();
    let pot = Potential::cubic(vec![1.0; k], b)?;
    let cfg = MultiplicityConfig {
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..MultiplicityConfig::default()
    };

    let t = Instant::now();
    let res = run_multiplicity(&dom, &pot, &cfg)?;
    let c = &res.constants;
    println!("nodes {}  |D| {:.4e}  C_eta {:.4e}  R {:.4}", dom.len(), c.d_measure, c.c_eta, c.r_cap);
    for l in 1..=dom.n_chambers() {
        println!("r_{l}^2 = {:.6e}", c.r(l).powi(2));
    }
    for e in &res.entries {
        let bumps: Vec<String> = e.admissible.bumps.iter().map(|b| format!("{:.3e}", b.size)).collect();
        println!(
            "L={:<8} {:<16} iters {:>4} J {:>12.6} sig {} target {} retried {} min {:.2e} bumps [{}]",
            e.sets_code(),
            e.status.as_str(),
            e.report.iterations,
            e.energy,
            e.signature.code(),
            e.target.code(),
            e.retried,
            e.min_value,
            bumps.join(", ")
        );
        if let Some(c) = &e.coercivity {
            println!("    J'' on V-: {:.4}  on V+: {:?}", -c.minus_margin, c.plus_margin);
        }
    }
    println!(
        "gap: smallest large/r^2 {:?}, largest small/r^2 {:?}, eps^2 {:.3e}",
        res.gap.min_large_ratio, res.gap.max_small_ratio, res.gap.eps_sq
    );
    println!("count {} of {}  ({:.1?})", res.count, res.expected, t.elapsed());
    Ok(())
}
