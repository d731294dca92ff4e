//! Generalized Nehari constraints `proj_{V_u} ∇J(u) = 0`.
//!
//! Two instances are provided. The ground-state constraint uses the moving
//! generators `ξ_i(u) = u_i e_i`. The multi-bump constraint uses
//! `ξ_{i,l}(u) = η_l u_i e_i` for `l ∈ L_i`, plus the fixed subspace `V⁺` of
//! fields whose `i`-th component vanishes on the chambers listed in `L_i`.

mod diagnostics;
mod multiplier;
mod retraction;

pub use diagnostics::{
    admissible_check, coercivity_check, generator_gram, injectivity_estimate, invariance_check,
    localization_gap, perturbed_identity_check, AdmissibleReport, BumpEntry, CoercivityReport,
    Injectivity, LocalizationGap,
};
pub use multiplier::{multiplier, project, MultiplierEstimate, Projection};
pub use retraction::{scale_to_nehari, RETRACTION_ACCEPT, RETRACTION_MAX_SWEEPS};

use std::sync::OnceLock;

use crate::energy::{energy_gradient, hess_apply, Field, Potential};
use crate::error::{Error, Result};
use crate::grid_domain::{CutoffFamily, GridDomain};
use crate::linalg::{dot, BandCholesky};

/// One moving generator `w ⊙ u_i e_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub comp: usize,
    /// Chamber of the cutoff, `None` for the ground-state generator.
    pub chamber: Option<usize>,
    /// Nodal weight; `None` means `w ≡ 1`.
    pub weight: Option<Vec<f64>>,
}

impl Generator {
    fn weight_at(&self, x: usize) -> f64 {
        self.weight.as_ref().map_or(1.0, |w| w[x])
    }

    /// `w ⊙ f`.
    pub fn weighted(&self, f: &[f64]) -> Vec<f64> {
        match &self.weight {
            None => f.to_vec(),
            Some(w) => w.iter().zip(f).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn label(&self) -> String {
        match self.chamber {
            None => format!("{}", self.comp + 1),
            Some(l) => format!("{}.{}", self.comp + 1, l),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    GroundState,
    MultiBump {
        /// `L_i` as sorted 1-based chamber ids.
        sets: Vec<Vec<usize>>,
    },
}

type VplusFactor = Option<(BandCholesky, Vec<usize>)>;

#[derive(Debug)]
pub struct ConstraintSpec {
    variant: Variant,
    k: usize,
    generators: Vec<Generator>,
    /// Per component: true where the node belongs to the support of `V⁺`.
    vplus: Vec<Vec<bool>>,
    cuts: Option<CutoffFamily>,
    vplus_factor: OnceLock<Vec<VplusFactor>>,
}

impl Clone for ConstraintSpec {
    fn clone(&self) -> Self {
        Self {
            variant: self.variant.clone(),
            k: self.k,
            generators: self.generators.clone(),
            vplus: self.vplus.clone(),
            cuts: self.cuts.clone(),
            vplus_factor: OnceLock::new(),
        }
    }
}

impl ConstraintSpec {
    pub fn ground_state(k: usize, n_nodes: usize) -> Self {
        Self {
            variant: Variant::GroundState,
            k,
            generators: (0..k)
                .map(|comp| Generator { comp, chamber: None, weight: None })
                .collect(),
            vplus: vec![vec![false; n_nodes]; k],
            cuts: None,
            vplus_factor: OnceLock::new(),
        }
    }

    pub fn multi_bump(dom: &GridDomain, sets: Vec<Vec<usize>>, cuts: CutoffFamily) -> Result<Self> {
        let n = dom.n_chambers();
        let mut sets = sets;
        for (i, s) in sets.iter_mut().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(Error::Precondition(format!("L_{} is empty", i + 1)));
            }
            if let Some(&l) = s.iter().find(|&&l| l == 0 || l > n) {
                return Err(Error::Precondition(format!(
                    "L_{} names chamber {l}, domain has {n}",
                    i + 1
                )));
            }
        }
        if cuts.n() != n || cuts.eta.iter().any(|e| e.len() != dom.len()) {
            return Err(Error::Precondition("cutoffs do not match the domain".into()));
        }
        let mut generators = Vec::new();
        let mut vplus = Vec::with_capacity(sets.len());
        for (i, s) in sets.iter().enumerate() {
            for &l in s {
                generators.push(Generator {
                    comp: i,
                    chamber: Some(l),
                    weight: Some(cuts.eta(l).to_vec()),
                });
            }
            vplus.push(
                (0..dom.len())
                    .map(|x| {
                        let lab = dom.label(x);
                        !(lab >= 1 && s.contains(&(lab as usize)))
                    })
                    .collect(),
            );
        }
        Ok(Self {
            variant: Variant::MultiBump { sets: sets.clone() },
            k: sets.len(),
            generators,
            vplus,
            cuts: Some(cuts),
            vplus_factor: OnceLock::new(),
        })
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }
    pub fn m(&self) -> usize {
        self.generators.len()
    }
    pub fn cuts(&self) -> Option<&CutoffFamily> {
        self.cuts.as_ref()
    }
    pub fn is_multi_bump(&self) -> bool {
        matches!(self.variant, Variant::MultiBump { .. })
    }

    /// `L_i`; `None` for the ground-state constraint.
    pub fn set(&self, i: usize) -> Option<&[usize]> {
        match &self.variant {
            Variant::GroundState => None,
            Variant::MultiBump { sets } => Some(&sets[i]),
        }
    }

    /// Support mask of `V⁺` for component `i`.
    pub fn vplus_mask(&self, i: usize) -> &[bool] {
        &self.vplus[i]
    }

    /// `ξ_a(u)`.
    pub fn generator_field(&self, a: usize, u: &Field) -> Field {
        let g = &self.generators[a];
        let mut f = Field::zeros(u.k(), u.n());
        *f.comp_mut(g.comp) = g.weighted(u.comp(g.comp));
        f
    }

    /// `ξ′_a(u)[v] = w ⊙ v_i e_i`.
    pub fn generator_derivative(&self, a: usize, v: &Field) -> Field {
        self.generator_field(a, v)
    }

    fn vplus_factors(&self, dom: &GridDomain) -> &[VplusFactor] {
        self.vplus_factor.get_or_init(|| {
            self.vplus
                .iter()
                .map(|mask| {
                    if !mask.iter().any(|&b| b) {
                        return None;
                    }
                    let (sub, map) = dom.stiffness().principal(mask);
                    Some((sub.cholesky().expect("principal submatrix of SPD is SPD"), map))
                })
                .collect()
        })
    }

    /// Dual norm of `J′(u)` restricted to `V⁺`, given the energy gradient.
    pub fn vplus_dual_norm(&self, dom: &GridDomain, e: &Field) -> f64 {
        if !self.is_multi_bump() {
            return 0.0;
        }
        let mut s = 0.0;
        for (i, f) in self.vplus_factors(dom).iter().enumerate() {
            if let Some((chol, map)) = f {
                let rhs: Vec<f64> = map.iter().map(|&x| e.comp(i)[x]).collect();
                let r = chol.solve(&rhs);
                s += dot(&rhs, &r);
            }
        }
        s.max(0.0).sqrt()
    }

    /// Restricts a field to the support of `V⁺` (zero elsewhere).
    pub fn mask_vplus(&self, f: &mut Field) {
        for i in 0..f.k() {
            let mask = &self.vplus[i];
            for (v, &keep) in f.comp_mut(i).iter_mut().zip(mask) {
                if !keep {
                    *v = 0.0;
                }
            }
        }
    }

    fn check_field(&self, u: &Field) -> Result<()> {
        if u.k() != self.k {
            return Err(Error::Precondition(format!(
                "field has {} components, constraint expects {}",
                u.k(),
                self.k
            )));
        }
        Ok(())
    }
}

/// `G_a(u) = J′(u)[ξ_a(u)]` for every generator, given `e = ∇J(u)`.
pub(crate) fn finite_from_gradient(spec: &ConstraintSpec, u: &Field, e: &Field) -> Vec<f64> {
    spec.generators
        .iter()
        .map(|g| {
            let (ui, ei) = (u.comp(g.comp), e.comp(g.comp));
            (0..u.n()).map(|x| g.weight_at(x) * ui[x] * ei[x]).sum()
        })
        .collect()
}

/// Euclidean gradients of every `G_a` at `u`, given `e = ∇J(u)`.
pub(crate) fn constraint_gradients(
    dom: &GridDomain,
    pot: &Potential,
    spec: &ConstraintSpec,
    u: &Field,
    e: &Field,
) -> Vec<Field> {
    let m = dom.mass();
    spec.generators
        .iter()
        .enumerate()
        .map(|(a, g)| {
            let xi = spec.generator_field(a, u);
            // −h^d D²F(u) ξ_a
            let mut out = hess_apply(pot, u, &xi);
            out.scale(-m);
            let i = g.comp;
            let kxi = dom.stiffness_apply(xi.comp(i));
            let we = g.weighted(e.comp(i));
            for (o, (p, q)) in out.comp_mut(i).iter_mut().zip(kxi.iter().zip(&we)) {
                *o += p + q;
            }
            out
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintResiduals {
    /// `G_a(u)`, one per generator.
    pub finite: Vec<f64>,
    /// Dual norm of `J′(u)` on `V⁺` (0 for the ground-state constraint).
    pub vplus_norm: f64,
}

impl ConstraintResiduals {
    pub fn finite_max(&self) -> f64 {
        self.finite.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn max(&self) -> f64 {
        self.finite_max().max(self.vplus_norm)
    }
}

pub fn residuals(
    dom: &GridDomain,
    pot: &Potential,
    spec: &ConstraintSpec,
    u: &Field,
) -> Result<ConstraintResiduals> {
    spec.check_field(u)?;
    let e = energy_gradient(dom, pot, u);
    Ok(ConstraintResiduals {
        finite: finite_from_gradient(spec, u, &e),
        vplus_norm: spec.vplus_dual_norm(dom, &e),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::d_energy;
    use crate::grid_domain::{build_cutoffs, Rect};

    fn dumbbell() -> GridDomain {
        GridDomain::build_dumbbell(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.5, 0.0, 2.5, 1.0)],
            &[Rect::new(1.0, 0.375, 1.5, 0.625)],
            0.125,
        )
        .unwrap()
    }

    fn bumpy(dom: &GridDomain, k: usize) -> Field {
        Field::from_components(
            (0..k)
                .map(|i| {
                    (0..dom.len())
                        .map(|x| {
                            let [a, b] = dom.position(x);
                            1.0 + 0.3 * (a * (i + 1) as f64).sin() + 0.2 * b
                        })
                        .collect()
                })
                .collect(),
        )
    }

    #[test]
    fn one_node_residual() {
        let d = GridDomain::interval(0.0, 1.0, 0.5).unwrap();
        let p = Potential::single_cubic(1.0).unwrap();
        let spec = ConstraintSpec::ground_state(1, 1);
        for lam in [0.5, 1.0, 8f64.sqrt()] {
            let u = Field::from_components(vec![vec![lam]]);
            let r = residuals(&d, &p, &spec, &u).unwrap();
            let expect = 4.0 * lam * lam - lam.powi(4) / 2.0;
            assert!((r.finite[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_field_zero_residuals() {
        let d = dumbbell();
        let p = Potential::single_cubic(1.0).unwrap();
        let cuts = build_cutoffs(&d, 0.2).unwrap();
        let spec = ConstraintSpec::multi_bump(&d, vec![vec![1, 2]], cuts).unwrap();
        let r = residuals(&d, &p, &spec, &Field::zeros(1, d.len())).unwrap();
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn ground_state_residual_is_directional_derivative() {
        let d = dumbbell();
        let p = Potential::cubic(vec![1.0, 2.0], vec![vec![0.0, -0.5], vec![-0.5, 0.0]]).unwrap();
        let spec = ConstraintSpec::ground_state(2, d.len());
        let u = bumpy(&d, 2);
        let r = residuals(&d, &p, &spec, &u).unwrap();
        for i in 0..2 {
            let xi = spec.generator_field(i, &u);
            let dj = d_energy(&d, &p, &u, &xi);
            assert!((r.finite[i] - dj).abs() < 1e-12 * dj.abs().max(1.0));
        }
    }

    #[test]
    fn constraint_gradient_matches_finite_difference() {
        let d = dumbbell();
        let p = Potential::cubic(vec![1.0, 2.0], vec![vec![0.0, -0.5], vec![-0.5, 0.0]]).unwrap();
        let cuts = build_cutoffs(&d, 0.2).unwrap();
        let spec = ConstraintSpec::multi_bump(&d, vec![vec![1, 2], vec![2]], cuts).unwrap();
        let u = bumpy(&d, 2);
        let v = bumpy(&d, 2).scaled(0.5);
        let e = energy_gradient(&d, &p, &u);
        let grads = constraint_gradients(&d, &p, &spec, &u, &e);
        let t = 1e-5;
        let mut up = u.clone();
        up.axpy(t, &v);
        let mut um = u.clone();
        um.axpy(-t, &v);
        let gp = residuals(&d, &p, &spec, &up).unwrap().finite;
        let gm = residuals(&d, &p, &spec, &um).unwrap().finite;
        for a in 0..spec.m() {
            let fd = (gp[a] - gm[a]) / (2.0 * t);
            let an = grads[a].euclid(&v);
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{a}: {fd} vs {an}");
        }
    }

    #[test]
    fn vplus_mask_excludes_chosen_chambers() {
        let d = dumbbell();
        let cuts = build_cutoffs(&d, 0.2).unwrap();
        let spec = ConstraintSpec::multi_bump(&d, vec![vec![1]], cuts).unwrap();
        for x in 0..d.len() {
            assert_eq!(spec.vplus_mask(0)[x], d.label(x) != 1);
        }
    }
}
