//! Effect of the channel width on the cutoff constant and on the size of
//! the small bumps, for the one-equation sweep on a dumbbell.
//!
//! Usage: `cargo run --release --example channel_width [-- <n>]`.

use nehari::energy::Potential;
use nehari::experiments::{run_multiplicity, MultiplicityConfig};
use nehari::grid_domain::{GridDomain, Rect};

fn main() -> nehari::Result<()> {
    let n: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32.0);
    let pot = Potential::single_cubic(1.0)?;
    println!("{:>6} {:>8} {:>12} {:>12} {:>10} {:>6}", "width", "|D|", "C_eta", "eps^2", "gap", "count");
    for width in [0.2, 0.1, 0.05] {
        let dom = GridDomain::build_dumbbell(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.5, 0.0, 2.5, 1.0)],
            &[Rect::new(1.0, 0.5 - width / 2.0, 1.5, 0.5 + width / 2.0)],
            1.0 / n,
        )?;
        let res = run_multiplicity(&dom, &pot, &MultiplicityConfig::default())?;
        println!(
            "{width:>6} {:>8.4} {:>12.4e} {:>12.4e} {:>10} {:>6}",
            res.constants.d_measure,
            res.constants.c_eta,
            res.gap.eps_sq,
            res.gap.separated(),
            res.count
        );
    }
    Ok(())
}
