use std::fs;
use std::path::{Path, PathBuf};

use crate::constraint::{coercivity_check, injectivity_estimate, ConstraintSpec};
use crate::energy::{beta_surrogate, check_assumptions, energy, Field, Potential};
use crate::error::{Error, Result};
use crate::experiments::{
    build_initializer, default_ramp_width, run_multiplicity, start_profile, start_tilt, MultiplicityResult,
};
use crate::grid_domain::{build_cutoffs, compute_constants, DomainConstants, GridDomain, Region};
use crate::io::{config_hash, render_records, write_field, Record};
use crate::solver::{lower_bound_check, minimize, ps_diagnostic, PsVerdict, Status};

use super::config::{InitialName, RunConfig};

/// A loaded configuration plus the command-line overrides.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub hash: String,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Context {
    pub fn new(cfg: RunConfig, text: &str, out: Option<PathBuf>, seed: Option<u64>, workers: Option<usize>) -> Self {
        let out = out
            .or_else(|| cfg.experiment.output.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Self {
            seed: seed.unwrap_or(cfg.experiment.seed),
            workers: workers.or(cfg.experiment.workers).unwrap_or(1).max(1),
            hash: config_hash(text),
            cfg,
            out,
        }
    }

    pub fn load(path: &Path, out: Option<PathBuf>, seed: Option<u64>, workers: Option<usize>) -> Result<Self> {
        let (cfg, text) = RunConfig::load(path)?;
        Ok(Self::new(cfg, &text, out, seed, workers))
    }

    fn stamp(&self, r: Record) -> Record {
        r.with("config_hash", &self.hash).with("seed", &self.seed)
    }

    fn header(&self) -> String {
        format!("config_hash={} seed={}", self.hash, self.seed)
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        let path = self.out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Result of a subcommand: its exit status, emitted records and warnings.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub code: i32,
    pub records: Vec<Record>,
    pub warnings: Vec<String>,
}

fn chamber_sets(ctx: &Context, dom: &GridDomain, pot: &Potential) -> Vec<Vec<usize>> {
    ctx.cfg
        .constraint
        .sets
        .clone()
        .unwrap_or_else(|| vec![(1..=dom.n_chambers()).collect(); pot.k()])
}

fn ramp_width(ctx: &Context, dom: &GridDomain) -> f64 {
    ctx.cfg
        .geometry
        .ramp_width
        .or_else(|| default_ramp_width(dom))
        .unwrap_or(dom.h())
}

fn domain_constants(ctx: &Context, dom: &GridDomain, pot: &Potential) -> Result<DomainConstants> {
    let cuts = build_cutoffs(dom, ramp_width(ctx, dom))?;
    let sets = chamber_sets(ctx, dom, pot);
    let g = build_initializer(dom, pot, &sets, &ctx.cfg.solver(ctx.seed))?;
    compute_constants(dom, &cuts, pot, &g, ctx.seed)
}

fn constants_records(ctx: &Context, dom: &GridDomain, c: &DomainConstants) -> Vec<Record> {
    let mut out = vec![ctx.stamp(
        Record::new("constants")
            .with("nodes", &dom.len())
            .with("h", &dom.h())
            .with("ramp_width", &ramp_width(ctx, dom))
            .with("c_eta", &c.c_eta)
            .with("d_measure", &c.d_measure)
            .with("r", &c.r)
            .with("r_cap", &c.r_cap)
            .with("p", &c.p)
            .with("c_f", &c.c_f)
            .with("delta", &c.delta)
            .with("g_norm_sq", &c.g_norm_sq)
            .with("g_energy", &c.g_energy),
    )];
    for e in &c.c_sob {
        out.push(ctx.stamp(
            Record::new("sobolev")
                .with("region", &e.region.key())
                .with("p", &e.p)
                .with("value", &e.value),
        ));
    }
    out
}

fn is_hard(e: &Error) -> bool {
    !matches!(e, Error::Estimation { .. } | Error::Retraction { .. })
}

/// Assumption checks, geometry validation and constants estimation.
pub fn cmd_check(ctx: &Context) -> Result<Outcome> {
    let dom = ctx.cfg.domain()?;
    let pot = ctx.cfg.potential()?;
    let mut out = Outcome::default();
    out.records.push(ctx.stamp(
        Record::new("geometry")
            .with("nodes", &dom.len())
            .with("chambers", &dom.n_chambers())
            .with("channels", &dom.channels().len())
            .with("d_measure", &dom.d_measure()),
    ));

    let rep = check_assumptions(&pot, ctx.cfg.experiment.samples, ctx.seed);
    for e in &rep.entries {
        out.records.push(ctx.stamp(
            Record::new("assumption")
                .with("name", e.name)
                .with("holds", &e.holds)
                .with("worst_margin", &e.worst_margin)
                .with("worst_raw", &e.worst_raw)
                .with("max_abs_raw", &e.max_abs_raw)
                .with("witness", &e.witness),
        ));
        if !e.holds {
            out.warnings.push(format!(
                "{} fails (worst margin {:.3e} at {:?})",
                e.name, e.worst_margin, e.witness
            ));
        }
    }

    match domain_constants(ctx, &dom, &pot) {
        Ok(c) => {
            out.records.extend(constants_records(ctx, &dom, &c));
            let f3_fails = rep.entries.iter().any(|e| e.name == "F3" && !e.holds);
            if f3_fails {
                let ball = c.c_sob(Region::BoundingBox, 4.0).unwrap_or(f64::NAN);
                if let Some(s) = beta_surrogate(&pot, ball, c.r_cap) {
                    out.records.push(ctx.stamp(
                        Record::new("surrogate")
                            .with("beta_bar", &pot.beta_bar())
                            .with("c_sob_ball_4", &ball)
                            .with("r_cap", &c.r_cap)
                            .with("bound", &s),
                    ));
                    out.warnings.push(format!(
                        "positive coupling: F3 replaced by the smallness bound beta_bar C^4 R^4 = {s:.6e}"
                    ));
                }
            }
        }
        Err(e) if !is_hard(&e) => out.warnings.push(format!("constants: {e}")),
        Err(e) => return Err(e),
    }
    ctx.write("check.txt", &render_records(&out.records))?;
    Ok(out)
}

pub fn cmd_constants(ctx: &Context) -> Result<Outcome> {
    let dom = ctx.cfg.domain()?;
    let pot = ctx.cfg.potential()?;
    let c = domain_constants(ctx, &dom, &pot)?;
    let records = constants_records(ctx, &dom, &c);
    ctx.write("constants.txt", &render_records(&records))?;
    Ok(Outcome {
        code: 0,
        records,
        warnings: Vec::new(),
    })
}

fn initial_field(ctx: &Context, dom: &GridDomain, pot: &Potential) -> Field {
    let k = pot.k();
    match ctx.cfg.experiment.initial {
        InitialName::Zero => Field::zeros(k, dom.len()),
        InitialName::Sine => Field::from_components((0..k).map(|a| start_profile(dom, a, k, start_tilt(pot))).collect()),
    }
}

/// Ground-state solve. Writes `u_<i>.csv` and `report.txt`.
pub fn cmd_ground(ctx: &Context) -> Result<Outcome> {
    let dom = ctx.cfg.domain()?;
    let pot = ctx.cfg.potential()?;
    let spec = ConstraintSpec::ground_state(pot.k(), dom.len());
    let u0 = initial_field(ctx, &dom, &pot);
    let (u, rep) = minimize(&dom, &pot, &spec, None, &u0, &ctx.cfg.solver(ctx.seed))?;

    let mut out = Outcome::default();
    for r in &rep.trace {
        out.records.push(ctx.stamp(
            Record::new("iter")
                .with("iter", &r.iter)
                .with("energy", &r.energy)
                .with("free_norm", &r.free_norm)
                .with("projected_norm", &r.projected_norm)
                .with("constraint", &r.constraint_max)
                .with("lambda_inf", &r.lambda_inf)
                .with("step", &r.step)
                .with("energy_drop", &r.energy_drop),
        ));
    }
    let converged = rep.status == Status::Converged;
    let n2 = u.norm_sq(&dom);
    let mut summary = Record::new("ground")
        .with("status", rep.status.as_str())
        .with("iterations", &rep.iterations)
        .with("energy", &energy(&dom, &pot, &u))
        .with("norm_sq", &n2)
        .with("free_norm", &rep.final_free_norm)
        .with("projected_norm", &rep.final_projected_norm)
        .with("constraint", &rep.final_constraint)
        .with("lambda", &rep.final_lambda)
        .with("min_value", &u.min_value())
        .with("message", &rep.message);
    if converged {
        let lb = lower_bound_check(&dom, &pot, &u)?;
        let coer = coercivity_check(&dom, &pot, &spec, &u, 1, ctx.seed);
        summary = summary
            .with("lower_bound", &lb.holds())
            .with("energy_margin", &lb.energy_margin)
            .with("coercivity_minus", &-coer.minus_margin);
        match injectivity_estimate(&dom, &pot, &spec, &u) {
            Ok(inj) => {
                let verdict = match ps_diagnostic(&rep, &inj) {
                    PsVerdict::Holds => "holds".to_string(),
                    PsVerdict::Violated(n) => format!("violated@{n}"),
                    PsVerdict::Vacuous => "vacuous".to_string(),
                };
                summary = summary
                    .with("rho", &inj.rho)
                    .with("rho_prime", &inj.rho_prime)
                    .with("ps", &verdict);
            }
            Err(e) => out.warnings.push(format!("injectivity: {e}")),
        }
    } else {
        out.warnings.push(format!("solver ended with status {}", rep.status.as_str()));
    }
    if let Some(i) = rep.left_admissible_at {
        out.warnings.push(format!("iterate {i} left the admissible set"));
    }
    out.records.push(ctx.stamp(summary));
    ctx.write("report.txt", &render_records(&out.records))?;
    write_field(&ctx.out, "u_", &dom, &u, Some(&ctx.header()))?;
    out.code = if converged { 0 } else { 1 };
    Ok(out)
}

fn entry_records(ctx: &Context, res: &MultiplicityResult) -> Vec<Record> {
    let mut out = Vec::new();
    for e in &res.entries {
        let mut r = Record::new("entry")
            .with("index", &e.index)
            .with("sets", &e.sets_code())
            .with("status", e.status.as_str())
            .with("retried", &e.retried)
            .with("iterations", &e.report.iterations)
            .with("energy", &e.energy)
            .with("initial_energy", &e.initial_energy)
            .with("signature", &e.signature.code())
            .with("target", &e.target.code())
            .with("matches", &e.matches())
            .with("counted", &e.counted())
            .with("min_value", &e.min_value)
            .with("free_norm", &e.report.final_free_norm)
            .with("constraint", &e.report.final_constraint)
            .with("lambda_inf", &e.report.lambda_inf())
            .with("r_cap", &e.r_cap)
            .with("norm", &e.admissible.norm)
            .with("min_large_ratio", &e.admissible.gap.min_large_ratio)
            .with("max_small_ratio", &e.admissible.gap.max_small_ratio)
            .with("lower_bound", &e.lower_bound_ok)
            .with("left_admissible_at", &e.report.left_admissible_at.map(|v| v as u64));
        if let Some(c) = &e.coercivity {
            r = r
                .with("coercivity_minus", &-c.minus_margin)
                .with("coercivity_plus", &c.plus_margin);
        }
        if let Some(i) = &e.injectivity {
            r = r.with("rho", &i.rho).with("rho_prime", &i.rho_prime);
        }
        r = r.with("error", &e.error);
        out.push(ctx.stamp(r));
    }
    let c = &res.constants;
    out.push(ctx.stamp(
        Record::new("summary")
            .with("count", &res.count)
            .with("expected", &res.expected)
            .with("complete", &res.complete())
            .with("ramp_width", &res.ramp_width)
            .with("c_eta", &c.c_eta)
            .with("d_measure", &c.d_measure)
            .with("r", &c.r)
            .with("min_large_ratio", &res.gap.min_large_ratio)
            .with("max_small_ratio", &res.gap.max_small_ratio)
            .with("eps_sq", &res.gap.eps_sq)
            .with("surrogate", &res.surrogate),
    ));
    out
}

/// Full multiplicity sweep. Writes `entries.txt`, `bumps.csv`,
/// `traces.csv` and optionally the solution grids of every entry.
pub fn cmd_multibump(ctx: &Context) -> Result<Outcome> {
    let dom = ctx.cfg.domain()?;
    let pot = ctx.cfg.potential()?;
    let res = run_multiplicity(&dom, &pot, &ctx.cfg.multiplicity(ctx.seed, ctx.workers))?;
    let records = entry_records(ctx, &res);
    ctx.write("entries.txt", &render_records(&records))?;

    let mut bumps = format!("# {}\nentry,sets,component,chamber,size,r_sq,required\n", ctx.header());
    let mut traces = format!("# {}\nentry,iter,energy,free_norm,projected_norm\n", ctx.header());
    for e in &res.entries {
        for b in &e.admissible.bumps {
            bumps.push_str(&format!(
                "{},{},{},{},{:.16e},{:.16e},{}\n",
                e.index,
                e.sets_code(),
                b.comp + 1,
                b.chamber,
                b.size,
                b.threshold,
                b.required
            ));
        }
        for t in &e.report.trace {
            traces.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e}\n",
                e.index, t.iter, t.energy, t.free_norm, t.projected_norm
            ));
        }
        if ctx.cfg.experiment.dump_fields {
            fs::create_dir_all(&ctx.out).map_err(|err| Error::io(&ctx.out, err))?;
            write_field(&ctx.out, &format!("entry{}_u", e.index), &dom, &e.solution, Some(&ctx.header()))?;
        }
    }
    ctx.write("bumps.csv", &bumps)?;
    ctx.write("traces.csv", &traces)?;

    let mut warnings: Vec<String> = res
        .entries
        .iter()
        .filter(|e| !e.counted())
        .map(|e| {
            format!(
                "entry {} (L = {}) not counted: status {}, signature {} vs target {}",
                e.index,
                e.sets_code(),
                e.status.as_str(),
                e.signature.code(),
                e.target.code()
            )
        })
        .collect();
    if let Some(s) = res.surrogate {
        warnings.push(format!("positive coupling: smallness bound beta_bar C^4 R^4 = {s:.6e}"));
    }
    Ok(Outcome {
        code: if res.complete() { 0 } else { 2 },
        records,
        warnings,
    })
}
