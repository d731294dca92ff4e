//! End-to-end drivers: chamber ground states, the multi-bump initializer and
//! the multiplicity sweep over all bump patterns.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constraint::{
    admissible_check, coercivity_check, injectivity_estimate, AdmissibleReport, BumpEntry,
    CoercivityReport, ConstraintSpec, Injectivity, LocalizationGap,
};
use crate::energy::{beta_surrogate, energy, Field, Potential};
use crate::error::{Error, Result};
use crate::grid_domain::{
    build_cutoffs, compute_constants, Axis, DomainConstants, GridDomain, Region,
};
use crate::solver::{lower_bound_check_with, minimize, SolverConfig, SolverReport, Status};

/// `k × n` matrix, entry `(i, l)` true iff `∫_{Ω_l} |∇u_i|² > r_l²`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BumpSignature(pub Vec<Vec<bool>>);

impl BumpSignature {
    pub fn of(dom: &GridDomain, consts: &DomainConstants, u: &Field) -> Self {
        Self(
            (0..u.k())
                .map(|i| {
                    (1..=dom.n_chambers())
                        .map(|l| dom.chamber_energy(l, u.comp(i)) > consts.r(l).powi(2))
                        .collect()
                })
                .collect(),
        )
    }

    /// Indicator matrix of the chamber sets.
    pub fn target(sets: &[Vec<usize>], n: usize) -> Self {
        Self(
            sets.iter()
                .map(|s| (1..=n).map(|l| s.contains(&l)).collect())
                .collect(),
        )
    }

    /// Compact form such as `10|11` (components separated by `|`).
    pub fn code(&self) -> String {
        self.0
            .iter()
            .map(|row| row.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>())
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// Tilt for [`start_profile`]: nonzero when some coupling is negative, since
/// with `μ_i = μ_j = −β_ij` identical components have no Nehari scaling.
/// Cooperative couplings start synchronized.
pub fn start_tilt(pot: &Potential) -> f64 {
    let competing = pot.beta().iter().flatten().any(|&b| b < 0.0);
    if pot.k() > 1 && competing {
        0.8
    } else {
        0.0
    }
}

/// Positive sine bump for component `a` of `m`, tilted along `x` by a phase
/// that differs between components.
pub fn start_profile(dom: &GridDomain, a: usize, m: usize, tilt: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    let (nx, ny) = (dom.nx() as f64 - 1.0, dom.ny() as f64 - 1.0);
    let theta = 2.0 * PI * a as f64 / m as f64;
    dom.nodes()
        .iter()
        .map(|&(i, j)| {
            let (x, y) = (i as f64 / nx, if dom.dim() == 1 { 0.5 } else { j as f64 / ny });
            (PI * x).sin() * (PI * y).sin() * (1.0 + tilt * (PI * x + theta).cos())
        })
        .collect()
}

/// Ground state on chamber `l` alone for the components in `comps`
/// (0-based), extended by zero to `dom`.
pub fn subdomain_ground_state(
    dom: &GridDomain,
    pot: &Potential,
    l: usize,
    comps: &[usize],
    cfg: &SolverConfig,
) -> Result<Field> {
    if comps.is_empty() {
        return Err(Error::Precondition("component set must be nonempty".into()));
    }
    if l == 0 || l > dom.n_chambers() {
        return Err(Error::Precondition(format!("no chamber {l}")));
    }
    let (sub, offset) = dom.chamber_subdomain(l)?;
    let reduced = pot.restrict(comps)?;
    let spec = ConstraintSpec::ground_state(comps.len(), sub.len());
    let m = comps.len();
    let tilt = start_tilt(&reduced);
    let u0 = Field::from_components((0..m).map(|a| start_profile(&sub, a, m, tilt)).collect());
    let (v, rep) = minimize(&sub, &reduced, &spec, None, &u0, cfg)?;
    if rep.status != Status::Converged {
        return Err(Error::Retraction {
            reason: format!(
                "chamber {l} ground state for components {comps:?} ended {}",
                rep.status.as_str()
            ),
            last: None,
        });
    }
    let mut out = Field::zeros(pot.k(), dom.len());
    for (a, &i) in comps.iter().enumerate() {
        *out.comp_mut(i) = dom.embed(&sub, offset, v.comp(a));
    }
    Ok(out)
}

/// Chamber ground states keyed by `(chamber, component set)`.
#[derive(Debug, Clone, Default)]
pub struct GroundStateCache {
    map: BTreeMap<(usize, Vec<usize>), Field>,
}

impl GroundStateCache {
    /// Solves every chamber problem needed by `patterns` that is not cached yet.
    pub fn fill(
        &mut self,
        dom: &GridDomain,
        pot: &Potential,
        patterns: &[Vec<Vec<usize>>],
        cfg: &SolverConfig,
    ) -> Result<()> {
        let mut keys: Vec<(usize, Vec<usize>)> = patterns
            .iter()
            .flat_map(|sets| chamber_keys(sets, dom.n_chambers()))
            .filter(|k| !self.map.contains_key(k))
            .collect();
        keys.sort();
        keys.dedup();
        let solved: Vec<_> = keys
            .par_iter()
            .map(|(l, comps)| subdomain_ground_state(dom, pot, *l, comps, cfg))
            .collect();
        for (k, f) in keys.into_iter().zip(solved) {
            self.map.insert(k, f?);
        }
        Ok(())
    }

    pub fn get(&self, l: usize, comps: &[usize]) -> Option<&Field> {
        self.map.get(&(l, comps.to_vec()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn chamber_keys(sets: &[Vec<usize>], n: usize) -> Vec<(usize, Vec<usize>)> {
    (1..=n)
        .filter_map(|l| {
            let comps: Vec<usize> = (0..sets.len()).filter(|&i| sets[i].contains(&l)).collect();
            (!comps.is_empty()).then_some((l, comps))
        })
        .collect()
}

fn check_sets(dom: &GridDomain, pot: &Potential, sets: &[Vec<usize>]) -> Result<()> {
    if sets.len() != pot.k() {
        return Err(Error::Precondition(format!(
            "{} chamber sets for {} components",
            sets.len(),
            pot.k()
        )));
    }
    for (i, s) in sets.iter().enumerate() {
        if s.is_empty() || s.iter().any(|&l| l == 0 || l > dom.n_chambers()) {
            return Err(Error::Precondition(format!("invalid chamber set L_{} = {s:?}", i + 1)));
        }
    }
    Ok(())
}

/// The initializer `g`: in every chamber, the coupled ground state of the
/// components whose set contains it, summed over chambers.
pub fn build_initializer(
    dom: &GridDomain,
    pot: &Potential,
    sets: &[Vec<usize>],
    cfg: &SolverConfig,
) -> Result<Field> {
    let mut cache = GroundStateCache::default();
    build_initializer_cached(dom, pot, sets, cfg, &mut cache)
}

pub fn build_initializer_cached(
    dom: &GridDomain,
    pot: &Potential,
    sets: &[Vec<usize>],
    cfg: &SolverConfig,
    cache: &mut GroundStateCache,
) -> Result<Field> {
    check_sets(dom, pot, sets)?;
    cache.fill(dom, pot, &[sets.to_vec()], cfg)?;
    Ok(assemble(dom, pot, sets, cache))
}

fn assemble(dom: &GridDomain, pot: &Potential, sets: &[Vec<usize>], cache: &GroundStateCache) -> Field {
    let mut g = Field::zeros(pot.k(), dom.len());
    for (l, comps) in chamber_keys(sets, dom.n_chambers()) {
        g.axpy(1.0, cache.get(l, &comps).expect("cache filled"));
    }
    g
}

/// All `(2ⁿ − 1)ᵏ` choices of nonempty chamber sets, first component slowest.
pub fn enumerate_patterns(n: usize, k: usize) -> Vec<Vec<Vec<usize>>> {
    let subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (1..=n).filter(|&l| mask & (1 << (l - 1)) != 0).collect())
        .collect();
    let mut out: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                subsets.iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.push(s.clone());
                    p
                })
            })
            .collect();
    }
    out
}

/// Default cutoff ramp: a quarter of the shortest channel measured along
/// its axis (half of that when only one end is attached).
pub fn default_ramp_width(dom: &GridDomain) -> Option<f64> {
    dom.channels()
        .iter()
        .map(|ch| {
            let r = ch.rect;
            let len = match ch.axis {
                Axis::X => (r.i1 - r.i0) as f64,
                Axis::Y => (r.j1 - r.j0) as f64,
            } * dom.h();
            if ch.ends.iter().all(Option::is_some) {
                0.25 * len
            } else {
                0.5 * len
            }
        })
        .reduce(f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityConfig {
    pub solver: SolverConfig,
    /// Cutoff ramp width; [`default_ramp_width`] when `None`.
    pub ramp_width: Option<f64>,
    pub seed: u64,
    pub workers: usize,
    /// Normalized L² distance above which equal-signature solutions count
    /// as distinct.
    pub distinct_tol: f64,
    /// Relative size of the perturbation used for the single retry.
    pub retry_perturbation: f64,
    pub coercivity_trials: usize,
}

impl Default for MultiplicityConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            ramp_width: None,
            seed: 0,
            workers: 1,
            distinct_tol: 1e-3,
            retry_perturbation: 1e-2,
            coercivity_trials: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EntryResult {
    pub index: usize,
    pub sets: Vec<Vec<usize>>,
    pub target: BumpSignature,
    pub signature: BumpSignature,
    pub status: Status,
    pub retried: bool,
    pub energy: f64,
    pub initial_energy: f64,
    pub report: SolverReport,
    pub admissible: AdmissibleReport,
    pub coercivity: Option<CoercivityReport>,
    pub injectivity: Option<Injectivity>,
    pub lower_bound_ok: bool,
    pub min_value: f64,
    /// `R` for this entry's initializer.
    pub r_cap: f64,
    pub solution: Field,
    pub error: Option<String>,
}

impl EntryResult {
    pub fn matches(&self) -> bool {
        self.signature == self.target
    }

    /// Converged, on target and positive.
    pub fn counted(&self) -> bool {
        self.status == Status::Converged && self.matches() && self.min_value > 0.0
    }

    pub fn sets_code(&self) -> String {
        self.sets
            .iter()
            .map(|s| s.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("+"))
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone)]
pub struct MultiplicityResult {
    pub entries: Vec<EntryResult>,
    /// Number of pairwise distinct counted solutions.
    pub count: usize,
    pub expected: usize,
    /// Normalized L² distances between entry solutions.
    pub distances: Vec<Vec<f64>>,
    pub constants: DomainConstants,
    pub ramp_width: f64,
    /// Bound replacing F3 when some coupling is positive.
    pub surrogate: Option<f64>,
    /// Localization statistics pooled over counted entries.
    pub gap: LocalizationGap,
}

impl MultiplicityResult {
    pub fn complete(&self) -> bool {
        self.count == self.expected
    }
}

/// Constants of `base` with the norm cap recomputed from initializer `g`.
pub fn constants_for_initializer(
    base: &DomainConstants,
    dom: &GridDomain,
    pot: &Potential,
    g: &Field,
) -> DomainConstants {
    let mut c = base.clone();
    c.g_norm_sq = g.norm_sq(dom);
    c.g_energy = energy(dom, pot, g);
    let r2 = c.g_norm_sq.max((4.0 + 2.0 * c.delta) / c.delta * c.g_energy) + 1.0;
    c.r_cap = r2.sqrt();
    c
}

fn normalized_distance(dom: &GridDomain, a: &Field, b: &Field) -> f64 {
    let scale = a.l2_norm(dom).max(b.l2_norm(dom));
    if scale == 0.0 {
        return 0.0;
    }
    a.sub(b).l2_norm(dom) / scale
}

fn perturb(g: &Field, rel: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_components(
        g.components()
            .iter()
            .map(|c| c.iter().map(|&v| v * (1.0 + rel * rng.random_range(-1.0..1.0))).collect())
            .collect(),
    )
}

#[allow(clippy::too_many_arguments)]
fn run_entry(
    dom: &GridDomain,
    pot: &Potential,
    cfg: &MultiplicityConfig,
    base: &DomainConstants,
    cuts: &crate::grid_domain::CutoffFamily,
    cache: &GroundStateCache,
    index: usize,
    sets: &[Vec<usize>],
) -> EntryResult {
    let n = dom.n_chambers();
    let target = BumpSignature::target(sets, n);
    let g = assemble(dom, pot, sets, cache);
    let consts = constants_for_initializer(base, dom, pot, &g);
    let initial_energy = consts.g_energy;
    let failed = |error: String, solution: Field| EntryResult {
        index,
        sets: sets.to_vec(),
        signature: BumpSignature::of(dom, &consts, &solution),
        target: target.clone(),
        status: Status::RetractFail,
        retried: false,
        energy: energy(dom, pot, &solution),
        initial_energy,
        report: SolverReport {
            trace: Vec::new(),
            status: Status::RetractFail,
            iterations: 0,
            final_energy: f64::NAN,
            final_free_norm: f64::NAN,
            final_projected_norm: f64::NAN,
            final_constraint: f64::NAN,
            final_vplus: f64::NAN,
            final_lambda: Vec::new(),
            left_admissible_at: None,
            message: Some(error.clone()),
        },
        admissible: admissible_check(dom, &ConstraintSpec::ground_state(pot.k(), dom.len()), &consts, &solution),
        coercivity: None,
        injectivity: None,
        lower_bound_ok: false,
        min_value: solution.min_value(),
        r_cap: consts.r_cap,
        solution,
        error: Some(error),
    };
    let spec = match ConstraintSpec::multi_bump(dom, sets.to_vec(), cuts.clone()) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string(), g),
    };

    let mut retried = false;
    let mut attempt = minimize(dom, pot, &spec, Some(&consts), &g, &cfg.solver);
    let needs_retry = !matches!(&attempt, Ok((_, r)) if r.status == Status::Converged);
    if needs_retry {
        retried = true;
        let seed = cfg.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1));
        let g2 = perturb(&g, cfg.retry_perturbation, seed);
        attempt = minimize(dom, pot, &spec, Some(&consts), &g2, &cfg.solver);
    }
    let (u, report) = match attempt {
        Ok(x) => x,
        Err(e) => return failed(e.to_string(), g),
    };

    let admissible = admissible_check(dom, &spec, &consts, &u);
    let converged = report.status == Status::Converged;
    let coercivity = converged.then(|| coercivity_check(dom, pot, &spec, &u, cfg.coercivity_trials, cfg.seed));
    let injectivity = if converged {
        injectivity_estimate(dom, pot, &spec, &u).ok()
    } else {
        None
    };
    let c_sob = base.c_sob(Region::Domain, base.p).unwrap_or(f64::NAN);
    let lower_bound_ok = lower_bound_check_with(dom, pot, &u, c_sob).holds();
    EntryResult {
        index,
        sets: sets.to_vec(),
        signature: BumpSignature::of(dom, &consts, &u),
        target,
        status: report.status,
        retried,
        energy: energy(dom, pot, &u),
        initial_energy,
        error: report.message.clone(),
        report,
        admissible,
        coercivity,
        injectivity,
        lower_bound_ok,
        min_value: u.min_value(),
        r_cap: consts.r_cap,
        solution: u,
    }
}

/// Runs the multi-bump minimization for every bump pattern and counts the
/// distinct positive solutions found. Individual failures are recorded in
/// their entries; only setup errors abort the sweep.
pub fn run_multiplicity(dom: &GridDomain, pot: &Potential, cfg: &MultiplicityConfig) -> Result<MultiplicityResult> {
    let patterns = enumerate_patterns(dom.n_chambers(), pot.k());
    run_patterns(dom, pot, cfg, &patterns)
}

/// As [`run_multiplicity`] restricted to the given patterns.
pub fn run_patterns(
    dom: &GridDomain,
    pot: &Potential,
    cfg: &MultiplicityConfig,
    patterns: &[Vec<Vec<usize>>],
) -> Result<MultiplicityResult> {
    let n = dom.n_chambers();
    for sets in patterns {
        check_sets(dom, pot, sets)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        let ramp = match cfg.ramp_width {
            Some(w) => w,
            None => default_ramp_width(dom).unwrap_or(dom.h()),
        };
        let cuts = build_cutoffs(dom, ramp)?;
        let mut cache = GroundStateCache::default();
        let all: Vec<Vec<usize>> = vec![(1..=n).collect(); pot.k()];
        let mut needed = patterns.to_vec();
        needed.push(all.clone());
        cache.fill(dom, pot, &needed, &cfg.solver)?;
        let g_all = assemble(dom, pot, &all, &cache);
        let base = compute_constants(dom, &cuts, pot, &g_all, cfg.seed)?;

        let entries: Vec<EntryResult> = patterns
            .par_iter()
            .enumerate()
            .map(|(idx, sets)| run_entry(dom, pot, cfg, &base, &cuts, &cache, idx, sets))
            .collect();

        let m = entries.len();
        let mut distances = vec![vec![0.0; m]; m];
        for a in 0..m {
            for b in a + 1..m {
                let d = normalized_distance(dom, &entries[a].solution, &entries[b].solution);
                distances[a][b] = d;
                distances[b][a] = d;
            }
        }
        let mut kept: Vec<usize> = Vec::new();
        for (a, e) in entries.iter().enumerate() {
            if !e.counted() {
                continue;
            }
            let distinct = kept.iter().all(|&b| {
                entries[b].signature != e.signature || distances[a][b] > cfg.distinct_tol
            });
            if distinct {
                kept.push(a);
            }
        }
        let pooled: Vec<BumpEntry> = entries
            .iter()
            .filter(|e| e.counted())
            .flat_map(|e| e.admissible.bumps.iter().cloned())
            .collect();
        let surrogate = base
            .c_sob(Region::BoundingBox, 4.0)
            .and_then(|c| beta_surrogate(pot, c, base.r_cap));
        Ok(MultiplicityResult {
            count: kept.len(),
            expected: patterns.len(),
            gap: crate::constraint::localization_gap(&pooled),
            entries,
            distances,
            constants: base,
            ramp_width: ramp,
            surrogate,
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationReport {
    pub bumps: Vec<BumpEntry>,
    pub gap: LocalizationGap,
}

/// Per `(i, l)` bump sizes against `r_l²`, with the empirical gap.
/// Without chamber sets every bump is reported with `required = false`.
pub fn localization_report(
    dom: &GridDomain,
    consts: &DomainConstants,
    sets: Option<&[Vec<usize>]>,
    u: &Field,
) -> LocalizationReport {
    let bumps: Vec<BumpEntry> = (0..u.k())
        .flat_map(|i| {
            (1..=dom.n_chambers()).map(move |l| BumpEntry {
                comp: i,
                chamber: l,
                size: dom.chamber_energy(l, u.comp(i)),
                threshold: consts.r(l).powi(2),
                required: sets.is_some_and(|s| s[i].contains(&l)),
            })
        })
        .collect();
    LocalizationReport {
        gap: crate::constraint::localization_gap(&bumps),
        bumps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_domain::Rect;

    fn dumbbell(h: f64) -> GridDomain {
        GridDomain::build_dumbbell(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.5, 0.0, 2.5, 1.0)],
            &[Rect::new(1.0, 0.375, 1.5, 0.625)],
            h,
        )
        .unwrap()
    }

    #[test]
    fn pattern_count() {
        assert_eq!(enumerate_patterns(2, 1).len(), 3);
        assert_eq!(enumerate_patterns(2, 2).len(), 9);
        assert_eq!(enumerate_patterns(3, 1).len(), 7);
        assert_eq!(enumerate_patterns(1, 1), vec![vec![vec![1]]]);
    }

    #[test]
    fn initializer_support_and_signature_shape() {
        let d = dumbbell(0.125);
        let p = Potential::single_cubic(1.0).unwrap();
        let cfg = SolverConfig::default();
        let g = build_initializer(&d, &p, &[vec![1]], &cfg).unwrap();
        for x in 0..d.len() {
            if d.label(x) != 1 {
                assert_eq!(g.comp(0)[x], 0.0);
            }
        }
        assert!(d.chamber_energy(1, g.comp(0)) > 0.0);
    }

    #[test]
    fn outside_components_are_zero() {
        let d = dumbbell(0.125);
        let p = Potential::cubic(vec![1.0, 1.0], vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        let u = subdomain_ground_state(&d, &p, 2, &[1], &SolverConfig::default()).unwrap();
        assert!(u.comp(0).iter().all(|&v| v == 0.0));
        assert!(u.comp(1).iter().any(|&v| v > 0.0));
    }

    #[test]
    fn target_code() {
        let t = BumpSignature::target(&[vec![1], vec![1, 2]], 2);
        assert_eq!(t.code(), "10|11");
    }
}
