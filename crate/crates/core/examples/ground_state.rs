//! Ground state of `−Δu = u³` on the unit square.
//!
//! Usage: `cargo run --release --example ground_state [-- <n>]` where the
//! mesh width is `1/n` (default 64).

use std::time::Instant;

use nehari::constraint::{coercivity_check, injectivity_estimate, ConstraintSpec};
use nehari::energy::{energy, Field, Potential};
use nehari::grid_domain::{GridDomain, Rect};
use nehari::solver::{lower_bound_check, minimize, ps_diagnostic, SolverConfig};

fn main() -> nehari::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let dom = GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], 1.0 / n as f64)?;
    let pot = Potential::single_cubic(1.0)?;
    let spec = ConstraintSpec::ground_state(1, dom.len());
    let u0 = Field::from_components(vec![(0..dom.len())
        .map(|k| {
            let [x, y] = dom.position(k);
            (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
        })
        .collect()]);

    let t = Instant::now();
    let (u, rep) = minimize(&dom, &pot, &spec, None, &u0, &SolverConfig::default())?;
    println!("status      {}", rep.status.as_str());
    println!("iterations  {}", rep.iterations);
    println!("time        {:.2?}", t.elapsed());

    let j = energy(&dom, &pot, &u);
    let n2 = u.norm_sq(&dom);
    let quartic: f64 = u.comp(0).iter().map(|v| v.powi(4)).sum::<f64>() * dom.h().powi(2);
    println!("energy      {j:.12}");
    println!("nehari      {:.3e}", (n2 - quartic).abs() / n2);
    println!("J - |u|^2/4 {:.3e}", (j - 0.25 * n2).abs() / j);
    println!("lambda      {:.3e}", rep.lambda_inf());
    println!("residual    {:.3e}", rep.final_free_norm);
    println!("min value   {:.3e}", u.min_value());
    println!("max value   {:.6}", u.comp(0).iter().cloned().fold(0.0, f64::max));

    let coer = coercivity_check(&dom, &pot, &spec, &u, 0, 1);
    let inj = injectivity_estimate(&dom, &pot, &spec, &u)?;
    println!("J''[v-,v-]  {:.6}", -coer.minus_margin);
    println!("rho, rho'   {:.6} {:.6}", inj.rho, inj.rho_prime);
    println!("ps          {:?}", ps_diagnostic(&rep, &inj));
    let lb = lower_bound_check(&dom, &pot, &u)?;
    println!("lower bound {} (margin {:.3e})", lb.holds(), lb.energy_margin);
    Ok(())
}
