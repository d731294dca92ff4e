//! Runtime checks that a multi-bump minimizer is a free critical point:
//! multiplier, coercivity on both subspaces, injectivity constants,
//! generator invariance and the cutoff identity.
//!
//! Usage: `cargo run --release --example natural_constraint_diagnostics`.

use nehari::constraint::{
    coercivity_check, injectivity_estimate, invariance_check, multiplier, perturbed_identity_check,
    ConstraintSpec,
};
use nehari::energy::Potential;
use nehari::experiments::{build_initializer, default_ramp_width};
use nehari::grid_domain::{build_cutoffs, compute_constants, GridDomain, Rect};
use nehari::solver::{minimize, ps_diagnostic, SolverConfig};

fn main() -> nehari::Result<()> {
    let dom = GridDomain::build_dumbbell(
        &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.5, 0.0, 2.5, 1.0)],
        &[Rect::new(1.0, 0.375, 1.5, 0.625)],
        1.0 / 16.0,
    )?;
    let pot = Potential::cubic(vec![1.0, 1.0], vec![vec![0.0, -1.0], vec![-1.0, 0.0]])?;
    let sets = vec![vec![1], vec![1, 2]];
    let cfg = SolverConfig::default();
    let cuts = build_cutoffs(&dom, default_ramp_width(&dom).unwrap())?;
    let g = build_initializer(&dom, &pot, &sets, &cfg)?;
    let consts = compute_constants(&dom, &cuts, &pot, &g, 5)?;
    let spec = ConstraintSpec::multi_bump(&dom, sets, cuts)?;

    let (u, rep) = minimize(&dom, &pot, &spec, Some(&consts), &g, &cfg)?;
    println!("status {} after {} iterations", rep.status.as_str(), rep.iterations);

    let m = multiplier(&dom, &pot, &spec, &u)?;
    println!("multipliers       {:?}", m.lambda);
    let c = coercivity_check(&dom, &pot, &spec, &u, 50, 9);
    println!("max J'' on V-     {:.6}", -c.minus_margin);
    println!("min J'' on V+     {:.6}", c.plus_margin.unwrap());
    let inj = injectivity_estimate(&dom, &pot, &spec, &u)?;
    println!("rho, rho'         {:.6} {:.6}", inj.rho, inj.rho_prime);
    println!("trace verdict     {:?}", ps_diagnostic(&rep, &inj));
    println!("invariance        {:.3e}", invariance_check(&dom, &spec, &u, 20, 4));
    println!("cutoff identity   {:.3e}", perturbed_identity_check(&dom, &pot, &spec, &u));
    Ok(())
}
