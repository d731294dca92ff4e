//! Retracted Sobolev-gradient descent on the Nehari set, and checks on the
//! resulting trace.

use crate::constraint::{
    admissible_check, project, scale_to_nehari, ConstraintSpec, Injectivity,
};
use crate::energy::{energy, energy_diff, Field, Potential};
use crate::error::{Error, Result};
use crate::grid_domain::{estimate_sobolev, DomainConstants, FaceSet, GridDomain, Region};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step0: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    /// Tolerance on the dual norm of `J′(u)`.
    pub grad_tol: f64,
    /// Tolerance on `max_a |G_a(u)|`.
    pub constraint_tol: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step0: 1.0,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            grad_tol: 1e-7,
            constraint_tol: 1e-9,
            max_iters: 5000,
            max_backtracks: 60,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step0 > 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.armijo_shrink > 0.0
            && self.armijo_shrink < 1.0
            && self.grad_tol > 0.0
            && self.constraint_tol > 0.0
            && self.max_iters > 0
            && self.max_backtracks > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("invalid solver configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    RetractFail,
    /// The final iterate is outside the admissible set.
    LeftAdmissible,
    /// No step satisfied the Armijo condition.
    Stalled,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::RetractFail => "retract_fail",
            Status::LeftAdmissible => "left_admissible",
            Status::Stalled => "stalled",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub energy: f64,
    /// Dual norm of `J′(u)`.
    pub free_norm: f64,
    /// Dual norm of `J′(u) − Σ λ_a G_a′(u)`.
    pub projected_norm: f64,
    pub constraint_max: f64,
    pub vplus_norm: f64,
    pub lambda_inf: f64,
    /// Step length accepted from this iterate (0 for the final record).
    pub step: f64,
    /// `J(u_{n+1}) − J(u_n)` for the accepted step (0 for the final record).
    pub energy_drop: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub trace: Vec<IterRecord>,
    pub status: Status,
    pub iterations: usize,
    pub final_energy: f64,
    pub final_free_norm: f64,
    pub final_projected_norm: f64,
    pub final_constraint: f64,
    pub final_vplus: f64,
    pub final_lambda: Vec<f64>,
    /// First iterate found outside the admissible set, if any.
    pub left_admissible_at: Option<usize>,
    pub message: Option<String>,
}

impl SolverReport {
    fn empty(status: Status, message: String) -> Self {
        Self {
            trace: Vec::new(),
            status,
            iterations: 0,
            final_energy: f64::NAN,
            final_free_norm: f64::NAN,
            final_projected_norm: f64::NAN,
            final_constraint: f64::NAN,
            final_vplus: f64::NAN,
            final_lambda: Vec::new(),
            left_admissible_at: None,
            message: Some(message),
        }
    }

    pub fn lambda_inf(&self) -> f64 {
        self.final_lambda.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

fn retract(dom: &GridDomain, pot: &Potential, spec: &ConstraintSpec, u: &Field) -> Result<Field> {
    let mut v = u.clone();
    v.clamp_nonnegative();
    let mut v = scale_to_nehari(dom, pot, spec, &v)?;
    v.clamp_nonnegative();
    Ok(v)
}

/// Minimizes `J` over the constraint set described by `spec`, starting from
/// the retraction of `u0`. When `consts` is given, membership of every
/// iterate in the admissible set is monitored.
pub fn minimize(
    dom: &GridDomain,
    pot: &Potential,
    spec: &ConstraintSpec,
    consts: Option<&DomainConstants>,
    u0: &Field,
    cfg: &SolverConfig,
) -> Result<(Field, SolverReport)> {
    cfg.validate()?;
    let mut u = match retract(dom, pot, spec, u0) {
        Ok(v) => v,
        Err(Error::Retraction { reason, last }) => {
            let report = SolverReport::empty(Status::RetractFail, reason);
            return Ok((last.map_or_else(|| u0.clone(), |b| *b), report));
        }
        Err(e) => return Err(e),
    };
    let in_a = |u: &Field| consts.is_none_or(|c| admissible_check(dom, spec, c, u).in_a());

    let mut trace = Vec::new();
    let mut left_at = if in_a(&u) { None } else { Some(0) };
    let mut message = None;
    let mut status = Status::MaxIters;
    let mut last_proj = None;
    for iter in 0..=cfg.max_iters {
        let pr = match project(dom, pot, spec, &u) {
            Ok(p) => p,
            Err(e) => {
                status = Status::RetractFail;
                message = Some(e.to_string());
                break;
            }
        };
        let j = energy(dom, pot, &u);
        let cmax = pr.finite.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let lam_inf = pr.lambda.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut rec = IterRecord {
            iter,
            energy: j,
            free_norm: pr.free_norm,
            projected_norm: pr.projected_norm,
            constraint_max: cmax,
            vplus_norm: pr.vplus_norm,
            lambda_inf: lam_inf,
            step: 0.0,
            energy_drop: 0.0,
        };
        if pr.free_norm < cfg.grad_tol && cmax < cfg.constraint_tol {
            status = Status::Converged;
            trace.push(rec);
            last_proj = Some(pr);
            break;
        }
        if iter == cfg.max_iters {
            trace.push(rec);
            last_proj = Some(pr);
            break;
        }

        let slope = -pr.projected_norm * pr.projected_norm;
        let mut s = cfg.step0;
        let mut accepted = None;
        let mut retract_errors = 0;
        for _ in 0..cfg.max_backtracks {
            let mut trial = u.clone();
            trial.axpy(s, &pr.direction);
            match retract(dom, pot, spec, &trial) {
                Ok(v) => {
                    let dj = energy_diff(dom, pot, &v, &u);
                    if dj <= cfg.armijo_c * s * slope && dj < 0.0 {
                        accepted = Some((v, dj));
                        break;
                    }
                }
                Err(Error::Retraction { .. }) => retract_errors += 1,
                Err(e) => {
                    message = Some(e.to_string());
                    retract_errors += 1;
                }
            }
            s *= cfg.armijo_shrink;
        }
        let Some((v, dj)) = accepted else {
            status = if retract_errors == cfg.max_backtracks {
                Status::RetractFail
            } else {
                Status::Stalled
            };
            message.get_or_insert_with(|| format!("line search failed at iterate {iter}"));
            trace.push(rec);
            last_proj = Some(pr);
            break;
        };
        rec.step = s;
        rec.energy_drop = dj;
        trace.push(rec);
        u = v;
        if left_at.is_none() && !in_a(&u) {
            left_at = Some(iter + 1);
        }
    }

    if status == Status::Converged && !in_a(&u) {
        status = Status::LeftAdmissible;
    }
    let last = trace.last().cloned();
    let report = SolverReport {
        iterations: trace.len().saturating_sub(1),
        status,
        final_energy: last.as_ref().map_or(f64::NAN, |r| r.energy),
        final_free_norm: last.as_ref().map_or(f64::NAN, |r| r.free_norm),
        final_projected_norm: last.as_ref().map_or(f64::NAN, |r| r.projected_norm),
        final_constraint: last.as_ref().map_or(f64::NAN, |r| r.constraint_max),
        final_vplus: last.as_ref().map_or(f64::NAN, |r| r.vplus_norm),
        final_lambda: last_proj.map(|p| p.lambda).unwrap_or_default(),
        left_admissible_at: left_at,
        message,
        trace,
    };
    Ok((u, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsVerdict {
    Holds,
    /// Iterate index at which the free gradient fails to follow the
    /// constrained residual.
    Violated(usize),
    Vacuous,
}

const PS_FLOOR: f64 = 1e-12;

/// Checks on a trace that the free gradient tracks the constrained residual:
/// for every `n`, some later iterate has `‖J′‖ ≤ (ρ′/ρ + 1) · max(t_n, 1e-12)`
/// where `t_n` is the constrained residual at `n`.
pub fn ps_diagnostic(report: &SolverReport, inj: &Injectivity) -> PsVerdict {
    let trace = &report.trace;
    if trace.is_empty() {
        return PsVerdict::Vacuous;
    }
    let kappa = inj.rho_prime / inj.rho + 1.0;
    let mut tail_min = vec![0.0; trace.len()];
    let mut m = f64::INFINITY;
    for (n, r) in trace.iter().enumerate().rev() {
        m = m.min(r.free_norm);
        tail_min[n] = m;
    }
    for (n, r) in trace.iter().enumerate() {
        if !(tail_min[n] <= kappa * r.projected_norm.max(PS_FLOOR)) {
            return PsVerdict::Violated(n);
        }
    }
    PsVerdict::Holds
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBound {
    pub norm: f64,
    pub threshold: f64,
    pub nonzero: bool,
}

impl ComponentBound {
    pub fn holds(&self) -> bool {
        !self.nonzero || self.norm >= self.threshold - 1e-6
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    pub energy: f64,
    pub norm_sq: f64,
    /// `J(u) − δ/(4+2δ) ‖u‖²`.
    pub energy_margin: f64,
    pub c_sob: f64,
    pub components: Vec<ComponentBound>,
}

impl LowerBoundReport {
    pub fn holds(&self) -> bool {
        self.energy_margin >= -1e-9 && self.components.iter().all(ComponentBound::holds)
    }
}

/// Both conclusions of the energy/norm lemma at `u`, with the discrete
/// Sobolev constant of the domain estimated from `seed`.
pub fn lower_bound_check(dom: &GridDomain, pot: &Potential, u: &Field) -> Result<LowerBoundReport> {
    let c = estimate_sobolev(dom, Region::Domain, FaceSet::ALL, pot.p(), 0)?;
    Ok(lower_bound_check_with(dom, pot, u, c))
}

/// As [`lower_bound_check`] with a precomputed `C_S(Ω, p)`.
pub fn lower_bound_check_with(dom: &GridDomain, pot: &Potential, u: &Field, c_sob: f64) -> LowerBoundReport {
    let (p, delta) = (pot.p(), pot.delta());
    let j = energy(dom, pot, u);
    let n2 = u.norm_sq(dom);
    let threshold = (pot.c_f() * c_sob.powf(p)).powf(-1.0 / (p - 2.0));
    let components = (0..u.k())
        .map(|i| ComponentBound {
            norm: u.comp_norm_sq(dom, i).sqrt(),
            threshold,
            nonzero: u.comp(i).iter().any(|&v| v != 0.0),
        })
        .collect();
    LowerBoundReport {
        energy: j,
        norm_sq: n2,
        energy_margin: j - delta / (4.0 + 2.0 * delta) * n2,
        c_sob,
        components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_domain::Rect;

    fn square(h: f64) -> GridDomain {
        GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], h).unwrap()
    }

    fn bump(dom: &GridDomain) -> Field {
        Field::from_components(vec![(0..dom.len())
            .map(|x| {
                let [a, b] = dom.position(x);
                a * (1.0 - a) * b * (1.0 - b)
            })
            .collect()])
    }

    #[test]
    fn single_equation_converges() {
        let d = square(1.0 / 16.0);
        let p = Potential::single_cubic(1.0).unwrap();
        let spec = ConstraintSpec::ground_state(1, d.len());
        let (u, rep) = minimize(&d, &p, &spec, None, &bump(&d), &SolverConfig::default()).unwrap();
        assert_eq!(rep.status, Status::Converged, "{rep:?}");
        assert!(rep.trace.iter().all(|r| r.energy_drop <= 0.0));
        let n2 = u.norm_sq(&d);
        assert!((energy(&d, &p, &u) - 0.25 * n2).abs() < 1e-9 * n2);
    }

    #[test]
    fn zero_start_is_rejected() {
        let d = square(0.25);
        let p = Potential::single_cubic(1.0).unwrap();
        let spec = ConstraintSpec::ground_state(1, d.len());
        let r = minimize(&d, &p, &spec, None, &Field::zeros(1, d.len()), &SolverConfig::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn empty_trace_is_vacuous() {
        let rep = SolverReport::empty(Status::RetractFail, String::new());
        let inj = Injectivity { rho: 1.0, rho_prime: 2.0 };
        assert_eq!(ps_diagnostic(&rep, &inj), PsVerdict::Vacuous);
    }

    #[test]
    fn pure_power_energy_is_sixth_of_norm() {
        let d = square(1.0 / 8.0);
        let p = Potential::pure_power(vec![1.0], 3.0).unwrap();
        let spec = ConstraintSpec::ground_state(1, d.len());
        let u = scale_to_nehari(&d, &p, &spec, &bump(&d)).unwrap();
        let rep = lower_bound_check(&d, &p, &u).unwrap();
        assert!(rep.energy_margin.abs() < 1e-10 * rep.norm_sq);
        assert!(rep.holds());
    }
}
