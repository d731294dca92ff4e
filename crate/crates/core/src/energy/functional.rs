use super::{Field, Potential};
use crate::grid_domain::GridDomain;

/// `∂_iF(u(x))` at every node, as a field.
pub fn nonlinear_grad(pot: &Potential, u: &Field) -> Field {
    let (k, n) = (u.k(), u.n());
    let mut out = Field::zeros(k, n);
    let mut y = vec![0.0; k];
    for x in 0..n {
        u.at(x, &mut y);
        for i in 0..k {
            out.comp_mut(i)[x] = pot.grad_i(&y, i);
        }
    }
    out
}

/// `∫ F(u)`.
pub fn potential_integral(dom: &GridDomain, pot: &Potential, u: &Field) -> f64 {
    let mut y = vec![0.0; u.k()];
    let mut s = 0.0;
    for x in 0..u.n() {
        u.at(x, &mut y);
        s += pot.value(&y);
    }
    s * dom.mass()
}

/// `J(u) = ½‖u‖² − ∫ F(u)`.
pub fn energy(dom: &GridDomain, pot: &Potential, u: &Field) -> f64 {
    0.5 * u.norm_sq(dom) - potential_integral(dom, pot, u)
}

/// `J(a) − J(b)`, evaluated without cancellation between the two energies.
pub fn energy_diff(dom: &GridDomain, pot: &Potential, a: &Field, b: &Field) -> f64 {
    let k = a.k();
    let mut quad = 0.0;
    for i in 0..k {
        let d: Vec<f64> = a.comp(i).iter().zip(b.comp(i)).map(|(x, y)| x - y).collect();
        let s: Vec<f64> = a.comp(i).iter().zip(b.comp(i)).map(|(x, y)| x + y).collect();
        quad += dom.stiffness_inner(&d, &s);
    }
    let (mut ya, mut yb) = (vec![0.0; k], vec![0.0; k]);
    let mut pf = 0.0;
    for x in 0..a.n() {
        a.at(x, &mut ya);
        b.at(x, &mut yb);
        pf += pot.value_diff(&ya, &yb);
    }
    0.5 * quad - dom.mass() * pf
}

/// Euclidean gradient of the discrete energy: `K u_i − h^d ∂_iF(u)`.
pub fn energy_gradient(dom: &GridDomain, pot: &Potential, u: &Field) -> Field {
    let mut e = u.stiffness(dom);
    e.axpy(-dom.mass(), &nonlinear_grad(pot, u));
    e
}

/// Riesz representative of `J′(u)` in the stiffness inner product.
pub fn free_gradient(dom: &GridDomain, pot: &Potential, u: &Field) -> Field {
    energy_gradient(dom, pot, u).riesz(dom)
}

/// `‖J′(u)‖` in the dual of the stiffness norm.
pub fn gradient_dual_norm(dom: &GridDomain, pot: &Potential, u: &Field) -> f64 {
    let e = energy_gradient(dom, pot, u);
    e.euclid(&e.riesz(dom)).max(0.0).sqrt()
}

/// `J′(u)[v]`.
pub fn d_energy(dom: &GridDomain, pot: &Potential, u: &Field, v: &Field) -> f64 {
    energy_gradient(dom, pot, u).euclid(v)
}

/// `J″(u)[v, w]`.
pub fn d2_energy(dom: &GridDomain, pot: &Potential, u: &Field, v: &Field, w: &Field) -> f64 {
    let k = u.k();
    let (mut y, mut a, mut b) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    let mut s = 0.0;
    for x in 0..u.n() {
        u.at(x, &mut y);
        v.at(x, &mut a);
        w.at(x, &mut b);
        s += pot.hess_form(&y, &a, &b);
    }
    v.inner(dom, w) - dom.mass() * s
}

/// `D²F(u) w` at every node, as a field.
pub fn hess_apply(pot: &Potential, u: &Field, w: &Field) -> Field {
    let k = u.k();
    let mut out = Field::zeros(k, u.n());
    let (mut y, mut b) = (vec![0.0; k], vec![0.0; k]);
    for x in 0..u.n() {
        u.at(x, &mut y);
        w.at(x, &mut b);
        let hm = pot.hess(&y);
        for i in 0..k {
            out.comp_mut(i)[x] = (0..k).map(|j| hm[i * k + j] * b[j]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_node_energy() {
        let d = GridDomain::interval(0.0, 1.0, 0.5).unwrap();
        let p = Potential::single_cubic(1.0).unwrap();
        let u = Field::from_components(vec![vec![1.0]]);
        assert_eq!(energy(&d, &p, &u), 1.875);
    }

    #[test]
    fn zero_field_has_zero_energy() {
        let d = GridDomain::interval(0.0, 1.0, 0.125).unwrap();
        let p = Potential::single_cubic(1.0).unwrap();
        assert_eq!(energy(&d, &p, &Field::zeros(1, d.len())), 0.0);
    }

    #[test]
    fn energy_diff_agrees_with_difference() {
        let d = GridDomain::interval(0.0, 1.0, 0.1).unwrap();
        let p = Potential::cubic(vec![1.0, 2.0], vec![vec![0.0, -0.5], vec![-0.5, 0.0]]).unwrap();
        let a = Field::from_components(vec![
            (0..d.len()).map(|x| (x as f64).sin()).collect(),
            (0..d.len()).map(|x| (x as f64 * 0.4).cos()).collect(),
        ]);
        let b = a.scaled(1.1);
        let direct = energy(&d, &p, &a) - energy(&d, &p, &b);
        assert!((energy_diff(&d, &p, &a, &b) - direct).abs() < 1e-12);
    }
}
