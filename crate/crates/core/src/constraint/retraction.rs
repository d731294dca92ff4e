use nalgebra::{DMatrix, DVector};

use super::{constraint_gradients, finite_from_gradient, ConstraintSpec, Variant};
use crate::energy::{energy_gradient, Field, Potential};
use crate::error::{Error, Result};
use crate::grid_domain::GridDomain;

/// Gauss–Seidel sweep cap for coupled components.
pub const RETRACTION_MAX_SWEEPS: usize = 100;
/// A retraction is accepted when `max_a |G_a| ≤ RETRACTION_ACCEPT · max(1, ‖u‖²)`.
pub const RETRACTION_ACCEPT: f64 = 1e-10;

const LAMBDA_MIN: f64 = 1e-8;
const LAMBDA_MAX: f64 = 1e8;
const NEWTON_TARGET: f64 = 1e-13;
const SWEEP_HANDOFF: f64 = 1e-6;
const NEWTON_MAX_ITERS: usize = 50;

/// Maps `u` onto the finite part of the constraint set.
///
/// Ground state: scales each component by the positive root `λ_i` of
/// `G_i(…, λ_i u_i, …) = 0`, sweeping over components until the joint
/// residual is small, then polishing with Newton on the scalings. If the
/// sweeps stall (cooperative coupling), a common scaling is found first
/// and Newton starts from there. Multi-bump: replaces `u_i` by `(1 + Σ_l t_{i,l} η_l) u_i`
/// with `t` from damped Newton on the finite residuals.
pub fn scale_to_nehari(
    dom: &GridDomain,
    pot: &Potential,
    spec: &ConstraintSpec,
    u: &Field,
) -> Result<Field> {
    spec.check_field(u)?;
    if !u.is_finite() {
        return Err(Error::retraction("non-finite input", Some(u.clone())));
    }
    match spec.variant() {
        Variant::GroundState => ground_state(dom, pot, spec, u),
        Variant::MultiBump { sets } => {
            for (i, s) in sets.iter().enumerate() {
                for &l in s {
                    if dom.chamber_energy(l, u.comp(i)) <= 0.0 {
                        return Err(Error::Precondition(format!(
                            "component {} vanishes on chamber {l}",
                            i + 1
                        )));
                    }
                }
            }
            newton(dom, pot, spec, u)
        }
    }
}

/// `G_i(u with u_i ← λ u_i) / λ²`, positive for small λ, negative for large.
fn scaled_residual(dom: &GridDomain, pot: &Potential, u: &Field, i: usize, a_i: f64, lam: f64) -> f64 {
    let k = u.k();
    let mut y = vec![0.0; k];
    let mut s = 0.0;
    for x in 0..u.n() {
        u.at(x, &mut y);
        let ui = y[i];
        if ui == 0.0 {
            continue;
        }
        y[i] = lam * ui;
        s += pot.grad_i(&y, i) * ui;
    }
    a_i - dom.mass() * s / lam
}

/// `∇F(u with all components ← λ u) · u / λ` summed over nodes, times the
/// mass, subtracted from `‖u‖²`.
fn joint_residual(dom: &GridDomain, pot: &Potential, u: &Field, a: f64, lam: f64) -> f64 {
    let k = u.k();
    let (mut y, mut gr) = (vec![0.0; k], vec![0.0; k]);
    let mut s = 0.0;
    for x in 0..u.n() {
        u.at(x, &mut y);
        let dot0: f64 = y.iter().map(|v| v * v).sum();
        if dot0 == 0.0 {
            continue;
        }
        let base = y.clone();
        y.iter_mut().for_each(|v| *v *= lam);
        pot.grad_into(&y, &mut gr);
        s += gr.iter().zip(&base).map(|(g, b)| g * b).sum::<f64>();
    }
    a - dom.mass() * s / lam
}

/// Positive root of `φ`, assumed positive for small and negative for large
/// arguments, by doubling/halving from 1 and then bisection.
fn bracket_root(phi: impl Fn(f64) -> f64, what: &str, u: &Field) -> Result<f64> {
    let f1 = phi(1.0);
    if f1 == 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (1.0, 1.0);
    if f1 > 0.0 {
        loop {
            hi *= 2.0;
            if hi > LAMBDA_MAX {
                return Err(Error::retraction(
                    format!("no sign change for {what} up to λ = {LAMBDA_MAX:e}"),
                    Some(u.clone()),
                ));
            }
            if phi(hi) < 0.0 {
                break;
            }
            lo = hi;
        }
    } else {
        loop {
            lo *= 0.5;
            if lo < LAMBDA_MIN {
                return Err(Error::retraction(
                    format!("no sign change for {what} down to λ = {LAMBDA_MIN:e}"),
                    Some(u.clone()),
                ));
            }
            if phi(lo) > 0.0 {
                break;
            }
            hi = lo;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = phi(mid);
        if f == 0.0 {
            return Ok(mid);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if phi(lo).abs() <= phi(hi).abs() { lo } else { hi })
}

fn component_root(dom: &GridDomain, pot: &Potential, u: &Field, i: usize) -> Result<f64> {
    let a_i = u.comp_norm_sq(dom, i);
    bracket_root(
        |l| scaled_residual(dom, pot, u, i, a_i, l),
        &format!("component {}", i + 1),
        u,
    )
}

fn scaled_max(spec: &ConstraintSpec, dom: &GridDomain, pot: &Potential, u: &Field) -> f64 {
    let e = energy_gradient(dom, pot, u);
    let g = finite_from_gradient(spec, u, &e);
    let scale = u.norm_sq(dom).max(1.0);
    g.iter().fold(0.0f64, |a, b| a.max(b.abs())) / scale
}

fn ground_state(dom: &GridDomain, pot: &Potential, spec: &ConstraintSpec, u: &Field) -> Result<Field> {
    for i in 0..u.k() {
        if u.comp(i).iter().all(|&v| v == 0.0) {
            return Err(Error::Precondition(format!("component {} is identically zero", i + 1)));
        }
    }
    if u.k() == 1 {
        let mut v = u.clone();
        let lam = component_root(dom, pot, &v, 0)?;
        v.scale(lam);
        let r = scaled_max(spec, dom, pot, &v);
        if r <= RETRACTION_ACCEPT {
            return Ok(v);
        }
        return newton(dom, pot, spec, &v);
    }
    match sweeps(dom, pot, spec, u) {
        // Nearly aligned components make the sweeps contract slowly; finish
        // the coupled scaling system with Newton.
        Ok(v) => newton(dom, pot, spec, &v),
        Err(sweep_err) => {
            // Cooperative couplings can make the sweeps expand. Scale all
            // components jointly, then solve the coupled system.
            let a = u.norm_sq(dom);
            let lam = bracket_root(|l| joint_residual(dom, pot, u, a, l), "joint scaling", u)
                .map_err(|_| sweep_err)?;
            newton(dom, pot, spec, &u.scaled(lam))
        }
    }
}

/// Gauss–Seidel sweeps of per-component scalings until the scaled residual
/// reaches the Newton handoff level.
fn sweeps(dom: &GridDomain, pot: &Potential, spec: &ConstraintSpec, u: &Field) -> Result<Field> {
    let mut v = u.clone();
    let mut last = f64::INFINITY;
    for sweep in 0..RETRACTION_MAX_SWEEPS {
        for i in 0..v.k() {
            let lam = component_root(dom, pot, &v, i)?;
            v.comp_mut(i).iter_mut().for_each(|x| *x *= lam);
        }
        let r = scaled_max(spec, dom, pot, &v);
        if r <= SWEEP_HANDOFF {
            return Ok(v);
        }
        if sweep >= 2 && !(r < last) {
            break;
        }
        last = r;
    }
    Err(Error::retraction(
        format!("Gauss-Seidel sweeps stalled at scaled residual {last:e}"),
        Some(v),
    ))
}

fn apply_factors(spec: &ConstraintSpec, u0: &Field, t: &[f64]) -> Field {
    let mut u = u0.clone();
    for i in 0..u.k() {
        let mut factor = vec![1.0; u.n()];
        for (a, g) in spec.generators().iter().enumerate() {
            if g.comp == i {
                match &g.weight {
                    Some(w) => factor.iter_mut().zip(w).for_each(|(f, wx)| *f += t[a] * wx),
                    None => factor.iter_mut().for_each(|f| *f += t[a]),
                }
            }
        }
        for (x, f) in u.comp_mut(i).iter_mut().zip(&factor) {
            *x *= f;
        }
    }
    u
}

fn newton(dom: &GridDomain, pot: &Potential, spec: &ConstraintSpec, u0: &Field) -> Result<Field> {
    let m = spec.m();
    let dirs: Vec<Field> = (0..m).map(|a| spec.generator_field(a, u0)).collect();
    let mut t = vec![0.0; m];
    let mut u = u0.clone();
    let eval = |u: &Field| {
        let e = energy_gradient(dom, pot, u);
        let g = finite_from_gradient(spec, u, &e);
        let scale = u.norm_sq(dom).max(1.0);
        let r = g.iter().fold(0.0f64, |a, b| a.max(b.abs())) / scale;
        (e, g, r)
    };
    let (mut e, mut g, mut res) = eval(&u);
    for _ in 0..NEWTON_MAX_ITERS {
        if res <= NEWTON_TARGET || !res.is_finite() {
            break;
        }
        let grads = constraint_gradients(dom, pot, spec, &u, &e);
        let jac = DMatrix::from_fn(m, m, |b, a| grads[b].euclid(&dirs[a]));
        let rhs = DVector::from_iterator(m, g.iter().map(|v| -v));
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(Error::retraction("singular Newton system", Some(u)));
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = t.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            if trial.iter().all(|&v| 1.0 + v >= 1e-2) {
                let ut = apply_factors(spec, u0, &trial);
                let (et, gt, rt) = eval(&ut);
                if rt.is_finite() && rt < (1.0 - 1e-4 * alpha) * res {
                    t = trial;
                    u = ut;
                    e = et;
                    g = gt;
                    res = rt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= RETRACTION_ACCEPT {
        Ok(u)
    } else {
        Err(Error::retraction(
            format!("Newton stalled at scaled residual {res:e}"),
            Some(u),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::residuals;
    use crate::grid_domain::{build_cutoffs, Rect};

    #[test]
    fn one_node_root() {
        let d = GridDomain::interval(0.0, 1.0, 0.5).unwrap();
        let p = Potential::single_cubic(1.0).unwrap();
        let spec = ConstraintSpec::ground_state(1, 1);
        let v = scale_to_nehari(&d, &p, &spec, &Field::from_components(vec![vec![1.0]])).unwrap();
        assert!((v.comp(0)[0] - 8f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn decoupled_matches_closed_form() {
        let d = GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], 0.125).unwrap();
        let p = Potential::cubic(vec![1.0, 3.0], vec![vec![0.0; 2]; 2]).unwrap();
        let spec = ConstraintSpec::ground_state(2, d.len());
        let u = Field::from_components(vec![
            (0..d.len()).map(|x| 1.0 + (x as f64 * 0.1).sin().abs()).collect(),
            (0..d.len()).map(|x| 0.5 + (x as f64 * 0.2).cos().abs()).collect(),
        ]);
        let v = scale_to_nehari(&d, &p, &spec, &u).unwrap();
        for i in 0..2 {
            let a = u.comp_norm_sq(&d, i);
            let b: f64 = p.mu()[i] * d.mass() * u.comp(i).iter().map(|x| x.powi(4)).sum::<f64>();
            let lam = (a / b).sqrt();
            assert!((v.comp(i)[0] / u.comp(i)[0] - lam).abs() < 1e-9 * lam);
        }
    }

    #[test]
    fn fixed_point_is_preserved() {
        let d = GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], 0.125).unwrap();
        let p = Potential::cubic(vec![1.0, 1.0], vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        let spec = ConstraintSpec::ground_state(2, d.len());
        let u = Field::from_components(vec![
            (0..d.len()).map(|x| 1.0 + (x as f64 * 0.1).sin().abs()).collect(),
            (0..d.len()).map(|x| 0.5 + (x as f64 * 0.2).cos().abs()).collect(),
        ]);
        let v = scale_to_nehari(&d, &p, &spec, &u).unwrap();
        let w = scale_to_nehari(&d, &p, &spec, &v).unwrap();
        let diff = w.sub(&v);
        let r = residuals(&d, &p, &spec, &v).unwrap().finite_max();
        assert!(diff.euclid(&diff).sqrt() < 1e-10 * v.euclid(&v).sqrt());
        assert!(r < 1e-12 * v.norm_sq(&d));
    }

    #[test]
    fn multi_bump_newton_converges() {
        let d = GridDomain::build_dumbbell(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.5, 0.0, 2.5, 1.0)],
            &[Rect::new(1.0, 0.375, 1.5, 0.625)],
            0.125,
        )
        .unwrap();
        let p = Potential::single_cubic(1.0).unwrap();
        let cuts = build_cutoffs(&d, 0.2).unwrap();
        let spec = ConstraintSpec::multi_bump(&d, vec![vec![1, 2]], cuts).unwrap();
        let u = Field::from_components(vec![(0..d.len())
            .map(|x| {
                let [a, b] = d.position(x);
                10.0 * (std::f64::consts::PI * b).sin() * (1.0 + 0.2 * a)
            })
            .collect()]);
        let v = scale_to_nehari(&d, &p, &spec, &u).unwrap();
        assert!(residuals(&d, &p, &spec, &v).unwrap().finite_max() < 1e-9);
    }

    #[test]
    fn zero_component_rejected() {
        let d = GridDomain::interval(0.0, 1.0, 0.25).unwrap();
        let p = Potential::single_cubic(1.0).unwrap();
        let spec = ConstraintSpec::ground_state(1, d.len());
        let e = scale_to_nehari(&d, &p, &spec, &Field::zeros(1, d.len()));
        assert!(matches!(e, Err(Error::Precondition(_))));
    }
}
