use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{project, ConstraintSpec};
use crate::energy::{d2_energy, nonlinear_grad, Field, Potential};
use crate::error::{Error, Result};
use crate::grid_domain::{DomainConstants, GridDomain};

#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityReport {
    /// `min −J″(u)[v,v]/‖v‖²` over sampled `v ∈ V⁻_u`.
    pub minus_margin: f64,
    /// `min J″(u)[v,v]/‖v‖²` over sampled `v ∈ V⁺`; `None` without `V⁺`.
    pub plus_margin: Option<f64>,
    pub trials: usize,
    pub passes: bool,
}

fn random_vplus(dom: &GridDomain, spec: &ConstraintSpec, rng: &mut ChaCha8Rng, smooth: bool) -> Field {
    let mut v = Field::from_components(
        (0..spec.k())
            .map(|_| (0..dom.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    );
    spec.mask_vplus(&mut v);
    if smooth {
        v = v.riesz(dom);
        spec.mask_vplus(&mut v);
    }
    v
}

fn random_vminus(spec: &ConstraintSpec, u: &Field, rng: &mut ChaCha8Rng, first: bool) -> Field {
    let mut v = Field::zeros(u.k(), u.n());
    for a in 0..spec.m() {
        let c = if first { 1.0 } else { rng.random_range(-1.0..1.0) };
        v.axpy(c, &spec.generator_field(a, u));
    }
    v
}

/// Samples the sign conditions `J″ < 0` on `V⁻_u` and `J″ > 0` on `V⁺`.
/// The first `V⁻` sample is `Σ_a ξ_a(u)` itself.
pub fn coercivity_check(
    dom: &GridDomain,
    pot: &Potential,
    spec: &ConstraintSpec,
    u: &Field,
    trials: usize,
    seed: u64,
) -> CoercivityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut minus = f64::INFINITY;
    for t in 0..trials.max(1) {
        let v = random_vminus(spec, u, &mut rng, t == 0);
        let n2 = v.norm_sq(dom);
        if n2 > 0.0 {
            minus = minus.min(-d2_energy(dom, pot, u, &v, &v) / n2);
        }
    }
    let plus = spec.is_multi_bump().then(|| {
        let mut best = f64::INFINITY;
        for t in 0..trials.max(1) {
            let v = random_vplus(dom, spec, &mut rng, t % 2 == 1);
            let n2 = v.norm_sq(dom);
            if n2 > 0.0 {
                best = best.min(d2_energy(dom, pot, u, &v, &v) / n2);
            }
        }
        best
    });
    let passes = minus > 0.0 && plus.is_none_or(|p| p > 0.0);
    CoercivityReport {
        minus_margin: minus,
        plus_margin: plus,
        trials,
        passes,
    }
}

/// `⟨ξ_a(u), ξ_b(u)⟩` in the stiffness inner product.
pub fn generator_gram(dom: &GridDomain, spec: &ConstraintSpec, u: &Field) -> DMatrix<f64> {
    let xi: Vec<Field> = (0..spec.m()).map(|a| spec.generator_field(a, u)).collect();
    DMatrix::from_fn(spec.m(), spec.m(), |a, b| xi[a].inner(dom, &xi[b]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injectivity {
    /// Lower bound `‖G′(u)[v]‖ ≥ ρ‖v‖` on the generator span.
    pub rho: f64,
    /// Operator norm of `G′(u)` on the whole space.
    pub rho_prime: f64,
}

pub fn injectivity_estimate(
    dom: &GridDomain,
    pot: &Potential,
    spec: &ConstraintSpec,
    u: &Field,
) -> Result<Injectivity> {
    let m = spec.m();
    let pr = project(dom, pot, spec, u)?;
    let xi: Vec<Field> = (0..m).map(|a| spec.generator_field(a, u)).collect();
    let mm = DMatrix::from_fn(m, m, |a, b| pr.grads[a].euclid(&xi[b]));
    let gram = generator_gram(dom, spec, u);
    let eig = gram.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return Err(Error::DegenerateGenerators("generator Gram matrix is singular".into()));
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()))
        * eig.eigenvectors.transpose();
    let sv = (mm * inv_sqrt).singular_values();
    let rho = sv.iter().cloned().fold(f64::INFINITY, f64::min);

    // Power iteration on w ↦ Σ_a ρ_a ⟨ρ_a, w⟩.
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a7e);
    let mut w = Field::from_components(
        (0..u.k())
            .map(|_| (0..u.n()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    );
    let n = w.norm(dom);
    w.scale(1.0 / n);
    let mut est = 0.0;
    for _ in 0..1000 {
        let mut next = Field::zeros(u.k(), u.n());
        for (g, r) in pr.grads.iter().zip(&pr.rho) {
            next.axpy(g.euclid(&w), r);
        }
        let nn = next.norm(dom);
        if nn == 0.0 {
            break;
        }
        let done = (nn - est).abs() <= 1e-13 * nn;
        est = nn;
        next.scale(1.0 / nn);
        w = next;
        if done {
            break;
        }
    }
    Ok(Injectivity {
        rho,
        rho_prime: est.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpEntry {
    /// 0-based component.
    pub comp: usize,
    /// 1-based chamber.
    pub chamber: usize,
    /// `∫_{Ω_l} |∇u_i|²`.
    pub size: f64,
    /// `r_l²`.
    pub threshold: f64,
    /// Whether the constraint demands this bump to be large.
    pub required: bool,
}

impl BumpEntry {
    pub fn large(&self) -> bool {
        self.size > self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationGap {
    /// Smallest `size / r_l²` among large bumps.
    pub min_large_ratio: Option<f64>,
    /// Largest `size / r_l²` among small bumps.
    pub max_small_ratio: Option<f64>,
    /// Largest small bump size, the empirical `ε²`.
    pub eps_sq: f64,
    /// `min_large_ratio − 1`, the empirical `C`.
    pub c_margin: Option<f64>,
}

impl LocalizationGap {
    pub fn separated(&self) -> bool {
        match (self.min_large_ratio, self.max_small_ratio) {
            (Some(a), Some(b)) => b < a,
            _ => true,
        }
    }
}

pub fn localization_gap(bumps: &[BumpEntry]) -> LocalizationGap {
    let mut large: Option<f64> = None;
    let mut small: Option<f64> = None;
    let mut eps_sq = 0.0f64;
    for b in bumps {
        let ratio = b.size / b.threshold;
        if b.large() {
            large = Some(large.map_or(ratio, |v| v.min(ratio)));
        } else {
            small = Some(small.map_or(ratio, |v| v.max(ratio)));
            eps_sq = eps_sq.max(b.size);
        }
    }
    LocalizationGap {
        min_large_ratio: large,
        max_small_ratio: small,
        eps_sq,
        c_margin: large.map(|v| v - 1.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleReport {
    pub norm: f64,
    pub r_cap: f64,
    pub bumps: Vec<BumpEntry>,
    pub gap: LocalizationGap,
}

impl AdmissibleReport {
    pub fn norm_ok(&self) -> bool {
        self.norm < self.r_cap
    }

    pub fn bumps_ok(&self) -> bool {
        self.bumps.iter().filter(|b| b.required).all(BumpEntry::large)
    }

    /// Membership in the admissible set `A`.
    pub fn in_a(&self) -> bool {
        self.norm_ok() && self.bumps_ok()
    }
}

pub fn admissible_check(
    dom: &GridDomain,
    spec: &ConstraintSpec,
    consts: &DomainConstants,
    u: &Field,
) -> AdmissibleReport {
    let mut bumps = Vec::new();
    for i in 0..u.k() {
        for l in 1..=dom.n_chambers() {
            bumps.push(BumpEntry {
                comp: i,
                chamber: l,
                size: dom.chamber_energy(l, u.comp(i)),
                threshold: consts.r(l).powi(2),
                required: spec.set(i).is_some_and(|s| s.contains(&l)),
            });
        }
    }
    AdmissibleReport {
        norm: u.norm(dom),
        r_cap: consts.r_cap,
        gap: localization_gap(&bumps),
        bumps,
    }
}

/// Checks that `ξ′_a(u)[v] ∈ V_u` for random `v ∈ V_u`: returns the largest
/// relative remainder left after removing the `V⁺` part and the best
/// combination of generators.
pub fn invariance_check(
    dom: &GridDomain,
    spec: &ConstraintSpec,
    u: &Field,
    trials: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = spec.m();
    let xi: Vec<Field> = (0..m).map(|a| spec.generator_field(a, u)).collect();
    // Values of each generator on the nodes outside V⁺.
    let fixed = |f: &Field| -> Vec<f64> {
        (0..spec.k())
            .flat_map(|i| {
                let mask = spec.vplus_mask(i);
                f.comp(i)
                    .iter()
                    .zip(mask)
                    .filter(|(_, &b)| !b)
                    .map(|(v, _)| *v)
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let cols: Vec<Vec<f64>> = xi.iter().map(fixed).collect();
    let rows = cols.first().map_or(0, Vec::len);
    let a = DMatrix::from_fn(rows, m, |r, c| cols[c][r]);
    let ata = a.transpose() * &a;
    let Some(chol) = ata.cholesky() else {
        return f64::INFINITY;
    };
    let mut worst = 0.0f64;
    for t in 0..trials.max(1) {
        let mut v = random_vplus(dom, spec, &mut rng, t % 2 == 1);
        if !spec.is_multi_bump() {
            v = Field::zeros(u.k(), u.n());
        }
        for x in &xi {
            v.axpy(rng.random_range(-1.0..1.0), x);
        }
        for b in 0..m {
            let z = spec.generator_derivative(b, &v);
            let zf = DVector::from_vec(fixed(&z));
            let total = z.euclid(&z).sqrt();
            if total == 0.0 {
                continue;
            }
            let c = chol.solve(&(a.transpose() * &zf));
            let rem = (&zf - &a * c).norm();
            worst = worst.max(rem / total);
        }
    }
    worst
}

/// Largest relative imbalance of the identity
/// `∫|∇(w u_i)|² = ∫ ∂_iF(u) w² u_i + Σ_edges (Δw)² u_x u_y` over generators.
pub fn perturbed_identity_check(dom: &GridDomain, pot: &Potential, spec: &ConstraintSpec, u: &Field) -> f64 {
    let f = nonlinear_grad(pot, u);
    let edges = dom.interior_edges();
    let mut worst = 0.0f64;
    for (a, g) in spec.generators().iter().enumerate() {
        let i = g.comp;
        let wu = spec.generator_field(a, u);
        let lhs = dom.stiffness_inner(wu.comp(i), wu.comp(i));
        if lhs == 0.0 {
            continue;
        }
        let w = |x: usize| g.weight.as_ref().map_or(1.0, |w| w[x]);
        let ui = u.comp(i);
        let pot_term: f64 = dom.mass()
            * (0..u.n()).map(|x| f.comp(i)[x] * w(x) * w(x) * ui[x]).sum::<f64>();
        let edge_term: f64 = dom.stiffness_scale()
            * edges
                .iter()
                .map(|&(x, y)| (w(x) - w(y)).powi(2) * ui[x] * ui[y])
                .sum::<f64>();
        worst = worst.max((lhs - pot_term - edge_term).abs() / lhs);
    }
    worst
}
