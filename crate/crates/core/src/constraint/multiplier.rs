use nalgebra::{DMatrix, DVector};

use super::{constraint_gradients, finite_from_gradient, ConstraintSpec};
use crate::energy::{energy_gradient, Field, Potential};
use crate::error::{Error, Result};
use crate::grid_domain::GridDomain;

/// Least-squares multipliers `λ` minimizing `‖J′(u) − Σ_a λ_a G_a′(u)‖_*`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierEstimate {
    pub lambda: Vec<f64>,
    pub residual_norm: f64,
}

/// Everything one descent step needs at a point `u`.
#[derive(Debug, Clone)]
pub struct Projection {
    /// Euclidean gradient of the discrete energy.
    pub e: Field,
    /// Riesz representative `r` of `J′(u)`.
    pub free: Field,
    pub free_norm: f64,
    pub finite: Vec<f64>,
    pub vplus_norm: f64,
    /// Euclidean gradients of the `G_a`.
    pub grads: Vec<Field>,
    /// Riesz representatives `ρ_a` of `G_a′(u)`.
    pub rho: Vec<Field>,
    /// `P_ab = ⟨ρ_a, ρ_b⟩`.
    pub gram: DMatrix<f64>,
    pub lambda: Vec<f64>,
    /// `d = −(r − Σ λ_a ρ_a)`.
    pub direction: Field,
    /// `‖d‖`, the dual norm of the constrained residual.
    pub projected_norm: f64,
}

pub fn project(dom: &GridDomain, pot: &Potential, spec: &ConstraintSpec, u: &Field) -> Result<Projection> {
    spec.check_field(u)?;
    let e = energy_gradient(dom, pot, u);
    let free = e.riesz(dom);
    let free_norm = e.euclid(&free).max(0.0).sqrt();
    let finite = finite_from_gradient(spec, u, &e);
    let vplus_norm = spec.vplus_dual_norm(dom, &e);
    let grads = constraint_gradients(dom, pot, spec, u, &e);
    let rho: Vec<Field> = grads.iter().map(|g| g.riesz(dom)).collect();
    let m = rho.len();
    let gram = DMatrix::from_fn(m, m, |a, b| {
        if a <= b {
            grads[a].euclid(&rho[b])
        } else {
            grads[b].euclid(&rho[a])
        }
    });
    let q = DVector::from_iterator(m, grads.iter().map(|g| g.euclid(&free)));
    let lambda = solve_normal(&gram, &q)?;
    let mut direction = free.scaled(-1.0);
    for (l, r) in lambda.iter().zip(&rho) {
        direction.axpy(*l, r);
    }
    // ‖d‖² = ⟨e − Σλ ∇G, K⁻¹(…)⟩
    let mut ed = e.clone();
    for (l, g) in lambda.iter().zip(&grads) {
        ed.axpy(-*l, g);
    }
    let projected_norm = (-ed.euclid(&direction)).max(0.0).sqrt();
    Ok(Projection {
        e,
        free,
        free_norm,
        finite,
        vplus_norm,
        grads,
        rho,
        gram,
        lambda,
        direction,
        projected_norm,
    })
}

fn solve_normal(gram: &DMatrix<f64>, q: &DVector<f64>) -> Result<Vec<f64>> {
    let m = gram.nrows();
    if m == 0 {
        return Ok(Vec::new());
    }
    let eig = gram.clone().symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &v in eig.eigenvalues.iter() {
        lo = lo.min(v);
        hi = hi.max(v.abs());
    }
    if !(lo > 1e-14 * hi) || hi == 0.0 {
        return Err(Error::DegenerateGenerators(format!(
            "generator Gram matrix has eigenvalues in [{lo:e}, {hi:e}]"
        )));
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateGenerators("Gram matrix not positive definite".into()))?;
    Ok(chol.solve(q).iter().cloned().collect())
}

pub fn multiplier(
    dom: &GridDomain,
    pot: &Potential,
    spec: &ConstraintSpec,
    u: &Field,
) -> Result<MultiplierEstimate> {
    let p = project(dom, pot, spec, u)?;
    Ok(MultiplierEstimate {
        lambda: p.lambda,
        residual_norm: p.projected_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::d_energy;

    #[test]
    fn one_generator_closed_form() {
        let d = GridDomain::interval(0.0, 1.0, 0.5).unwrap();
        let p = Potential::single_cubic(1.0).unwrap();
        let spec = ConstraintSpec::ground_state(1, 1);
        let u = Field::from_components(vec![vec![1.0]]);
        let est = multiplier(&d, &p, &spec, &u).unwrap();
        // e = 4u - u³/2, ∇G = 8u - 2u³ (both times the node), K = 4
        let (e, g) = (4.0 - 0.5, 8.0 - 2.0);
        let lam = (e * g / 4.0) / (g * g / 4.0);
        assert!((est.lambda[0] - lam).abs() < 1e-14);
        assert!(est.residual_norm < 1e-14);
    }

    #[test]
    fn direction_is_descent() {
        let d = GridDomain::interval(0.0, 1.0, 0.1).unwrap();
        let p = Potential::cubic(vec![1.0, 2.0], vec![vec![0.0, -0.5], vec![-0.5, 0.0]]).unwrap();
        let spec = ConstraintSpec::ground_state(2, d.len());
        let u = Field::from_components(vec![
            (0..d.len()).map(|x| 1.0 + (x as f64).sin().abs()).collect(),
            (0..d.len()).map(|x| 2.0 + (x as f64).cos()).collect(),
        ]);
        let pr = project(&d, &p, &spec, &u).unwrap();
        let slope = d_energy(&d, &p, &u, &pr.direction);
        let n2 = pr.direction.norm_sq(&d);
        assert!((slope + n2).abs() < 1e-10 * n2);
        for g in &pr.grads {
            assert!(g.euclid(&pr.direction).abs() < 1e-10 * n2.sqrt() * g.euclid(&g.riesz(&d)).sqrt());
        }
    }
}
