use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{estimate_c_eta, CutoffFamily, FaceSet, GridDomain, Region};
use crate::energy::{energy, Field, Potential};
use crate::error::{Error, Result};
use crate::linalg::dot;

const SOBOLEV_MAX_ITERS: usize = 20_000;
const SOBOLEV_TOL: f64 = 1e-13;

/// Estimate of `sup ‖φ‖_p / ‖∇φ‖₂` over nodal functions on `region`.
///
/// Uses the fixed-point ascent `φ ← K⁻¹(h^d |φ|^{p-2} φ)`, renormalized in the
/// stiffness norm, from a positive pseudo-random start.
pub fn estimate_sobolev(
    dom: &GridDomain,
    region: Region,
    dirichlet: FaceSet,
    p: f64,
    seed: u64,
) -> Result<f64> {
    if !(p > 2.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("Sobolev exponent must exceed 2, got {p}")));
    }
    let op = dom.region_operator(region, dirichlet)?;
    let chol = op.stiffness.cholesky().map_err(|_| {
        Error::Precondition(format!(
            "region {} has no Dirichlet part; the quotient is unbounded",
            region.key()
        ))
    })?;
    let m = op.mass;
    let n = op.nodes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let norm = |v: &[f64]| op.stiffness.inner(v, v).sqrt();
    let s = norm(&phi);
    phi.iter_mut().for_each(|v| *v /= s);
    let quotient = |v: &[f64]| (m * v.iter().map(|x| x.abs().powf(p)).sum::<f64>()).powf(1.0 / p);

    let mut q_old = quotient(&phi);
    for _ in 0..SOBOLEV_MAX_ITERS {
        let rhs: Vec<f64> = phi.iter().map(|&x| m * x.abs().powf(p - 2.0) * x).collect();
        let mut next = chol.solve(&rhs);
        let s = norm(&next);
        next.iter_mut().for_each(|v| *v /= s);
        let q = quotient(&next);
        phi = next;
        if (q - q_old).abs() <= SOBOLEV_TOL * q {
            return Ok(q);
        }
        q_old = q;
    }
    Err(Error::Estimation {
        what: "Sobolev constant",
        iterations: SOBOLEV_MAX_ITERS,
        last: q_old,
    })
}

/// `r = ((p/2) C_F C_S^p)^{-1/(p-2)}`.
pub fn threshold_from_sobolev(p: f64, c_f: f64, c_sob: f64) -> f64 {
    (0.5 * p * c_f * c_sob.powf(p)).powf(-1.0 / (p - 2.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevEntry {
    pub region: Region,
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConstants {
    pub c_eta: f64,
    pub c_sob: Vec<SobolevEntry>,
    pub d_measure: f64,
    /// Bump thresholds `r_l`, indexed by chamber `l - 1`.
    pub r: Vec<f64>,
    /// Norm cap `R`.
    pub r_cap: f64,
    pub p: f64,
    pub c_f: f64,
    pub delta: f64,
    pub g_norm_sq: f64,
    pub g_energy: f64,
    pub seed: u64,
}

impl DomainConstants {
    pub fn c_sob(&self, region: Region, p: f64) -> Option<f64> {
        self.c_sob
            .iter()
            .find(|e| e.region == region && e.p == p)
            .map(|e| e.value)
    }

    pub fn r(&self, l: usize) -> f64 {
        self.r[l - 1]
    }
}

/// Recomputes `r_l` from the stored Sobolev constant of chamber `l`.
pub fn rebuild_threshold(c: &DomainConstants, l: usize) -> Option<f64> {
    c.c_sob(Region::Chamber(l), c.p)
        .map(|s| threshold_from_sobolev(c.p, c.c_f, s))
}

/// Measures every domain constant used by the multi-bump construction.
/// `g` is the initializer defining the norm cap `R`.
pub fn compute_constants(
    dom: &GridDomain,
    cuts: &CutoffFamily,
    pot: &Potential,
    g: &Field,
    seed: u64,
) -> Result<DomainConstants> {
    if g.is_zero() {
        return Err(Error::Precondition(
            "initializer must be a nontrivial tuple".into(),
        ));
    }
    let p = pot.p();
    let c_eta = estimate_c_eta(dom, cuts)?;
    let mut c_sob = Vec::new();
    let mut r = Vec::with_capacity(dom.n_chambers());
    for l in 1..=dom.n_chambers() {
        let region = Region::Chamber(l);
        let value = estimate_sobolev(dom, region, dom.gamma_faces(l), p, seed)?;
        c_sob.push(SobolevEntry { region, p, value });
        r.push(threshold_from_sobolev(p, pot.c_f(), value));
    }
    let mut exps = vec![p];
    if p != 4.0 {
        exps.push(4.0);
    }
    for &q in &exps {
        let value = estimate_sobolev(dom, Region::BoundingBox, FaceSet::ALL, q, seed)?;
        c_sob.push(SobolevEntry { region: Region::BoundingBox, p: q, value });
    }
    let value = estimate_sobolev(dom, Region::Domain, FaceSet::ALL, p, seed)?;
    c_sob.push(SobolevEntry { region: Region::Domain, p, value });

    let delta = pot.delta();
    let g_norm_sq = g.norm_sq(dom);
    let g_energy = energy(dom, pot, g);
    let r2 = g_norm_sq.max((4.0 + 2.0 * delta) / delta * g_energy) + 1.0;
    Ok(DomainConstants {
        c_eta,
        c_sob,
        d_measure: dom.d_measure(),
        r,
        r_cap: r2.sqrt(),
        p,
        c_f: pot.c_f(),
        delta,
        g_norm_sq,
        g_energy,
        seed,
    })
}

/// Largest `∫ w φ² / ∫ |∇φ|²` over random `φ`, for checking a C_η estimate.
pub fn sampled_weight_quotient(dom: &GridDomain, w: &[f64], samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = dom.mass();
    (0..samples)
        .map(|_| {
            let phi: Vec<f64> = (0..dom.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let top: f64 = m * w.iter().zip(&phi).map(|(a, b)| a * b * b).sum::<f64>();
            top / dot(&phi, &dom.stiffness_apply(&phi))
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_domain::Rect;

    #[test]
    fn one_node_sobolev() {
        let d = GridDomain::interval(0.0, 1.0, 0.5).unwrap();
        let s = estimate_sobolev(&d, Region::Domain, FaceSet::ALL, 4.0, 1).unwrap();
        assert!((s - 0.5f64.powf(0.25) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_formula() {
        assert!((threshold_from_sobolev(4.0, 1.0, 1.0) - 0.5f64.sqrt()).abs() < 1e-15);
        let ratio = threshold_from_sobolev(4.0, 1.0, 2.0) / threshold_from_sobolev(4.0, 1.0, 1.0);
        assert!((ratio - 0.25).abs() < 1e-15);
    }

    #[test]
    fn free_face_raises_constant() {
        let d = GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], 0.125).unwrap();
        let full = estimate_sobolev(&d, Region::Chamber(1), FaceSet::ALL, 4.0, 3).unwrap();
        let mixed = FaceSet { right: false, ..FaceSet::ALL };
        let part = estimate_sobolev(&d, Region::Chamber(1), mixed, 4.0, 3).unwrap();
        assert!(part > full);
        let dom = estimate_sobolev(&d, Region::Domain, FaceSet::ALL, 4.0, 3).unwrap();
        assert!((dom - full).abs() < 1e-10 * full);
    }

    #[test]
    fn all_faces_free_is_rejected() {
        let d = GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], 0.25).unwrap();
        let e = estimate_sobolev(&d, Region::Chamber(1), FaceSet::default(), 4.0, 3);
        assert!(matches!(e, Err(Error::Precondition(_))));
    }
}
