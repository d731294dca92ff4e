//! Domain constants of a dumbbell: C_η, Sobolev constants, bump thresholds
//! r_l and the norm cap R, with a sampled check of C_η.
//!
//! Usage: `cargo run --release --example domain_constants [-- <n> <width>]`.

use nehari::energy::Potential;
use nehari::experiments::{build_initializer, default_ramp_width};
use nehari::grid_domain::{
    build_cutoffs, compute_constants, sampled_weight_quotient, GridDomain, Rect,
};
use nehari::solver::SolverConfig;

fn main() -> nehari::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let n = args.first().copied().unwrap_or(32.0);
    let width = args.get(1).copied().unwrap_or(0.1);
    let dom = GridDomain::build_dumbbell(
        &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.5, 0.0, 2.5, 1.0)],
        &[Rect::new(1.0, 0.5 - width / 2.0, 1.5, 0.5 + width / 2.0)],
        1.0 / n,
    )?;
    let pot = Potential::single_cubic(1.0)?;
    let ramp = default_ramp_width(&dom).unwrap();
    let cuts = build_cutoffs(&dom, ramp)?;
    let g = build_initializer(&dom, &pot, &[vec![1, 2]], &SolverConfig::default())?;
    let c = compute_constants(&dom, &cuts, &pot, &g, 7)?;

    println!("nodes {}  h {}  ramp {ramp}", dom.len(), dom.h());
    println!("|D|          {:.6e}", c.d_measure);
    println!("C_eta        {:.6e}", c.c_eta);
    for l in 1..=dom.n_chambers() {
        let sampled = sampled_weight_quotient(&dom, cuts.grad_sq(l), 200, 3);
        println!("  chamber {l}: sampled quotient {sampled:.6e} (must not exceed C_eta)");
    }
    for e in &c.c_sob {
        println!("C_S({:>8}, p={}) {:.6}", e.region.key(), e.p, e.value);
    }
    for l in 1..=dom.n_chambers() {
        println!("r_{l}          {:.6}   r_{l}^2 {:.6}", c.r(l), c.r(l).powi(2));
    }
    println!("C_F {}  delta {}  R {:.6}", c.c_f, c.delta, c.r_cap);
    Ok(())
}
