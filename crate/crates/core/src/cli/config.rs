//! Run configuration: a TOML file with the sections `geometry`, `potential`,
//! `constraint`, `solver` and `experiment`.

use std::path::Path;

use serde::Deserialize;

use crate::energy::Potential;
use crate::error::{Error, Result};
use crate::experiments::MultiplicityConfig;
use crate::grid_domain::{GridDomain, Rect};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryBlock,
    pub potential: PotentialBlock,
    #[serde(default)]
    pub constraint: ConstraintBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub h: f64,
    /// Chambers as `[x0, y0, x1, y1]`.
    #[serde(default)]
    pub chambers: Vec<[f64; 4]>,
    #[serde(default)]
    pub channels: Vec<[f64; 4]>,
    /// One-dimensional interval `[x0, x1]` instead of chambers.
    pub interval: Option<[f64; 2]>,
    pub ramp_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKindName {
    Cubic,
    Power,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub kind: PotentialKindName,
    pub mu: Vec<f64>,
    pub beta: Option<Vec<Vec<f64>>>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    #[default]
    Ground,
    Multibump,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct ConstraintBlock {
    #[serde(default)]
    pub variant: VariantName,
    /// Chamber sets `L_i` (1-based chambers), one per component.
    pub sets: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub step0: Option<f64>,
    pub armijo_c: Option<f64>,
    pub armijo_shrink: Option<f64>,
    pub grad_tol: Option<f64>,
    pub constraint_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub max_backtracks: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialName {
    #[default]
    Sine,
    Zero,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub driver: Option<String>,
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub initial: InitialName,
    pub distinct_tol: Option<f64>,
    pub retry_perturbation: Option<f64>,
    pub coercivity_trials: Option<usize>,
    /// Write the solution grids of every sweep entry.
    #[serde(default)]
    pub dump_fields: bool,
}

fn default_samples() -> usize {
    10_000
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            driver: None,
            output: None,
            seed: 0,
            workers: None,
            samples: default_samples(),
            initial: InitialName::Sine,
            distinct_tol: None,
            retry_perturbation: None,
            coercivity_trials: None,
            dump_fields: false,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })?;
        Ok((cfg, text))
    }

    fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if g.interval.is_some() == !g.chambers.is_empty() {
            return Err(Error::Config(
                "geometry: give exactly one of `chambers` or `interval`".into(),
            ));
        }
        if g.interval.is_some() && !g.channels.is_empty() {
            return Err(Error::Config("geometry.channels: not allowed with `interval`".into()));
        }
        let p = &self.potential;
        if let Some(b) = &p.beta {
            if p.kind == PotentialKindName::Power {
                return Err(Error::Config("potential.beta: only valid for kind = \"cubic\"".into()));
            }
            if b.len() != p.mu.len() || b.iter().any(|r| r.len() != p.mu.len()) {
                return Err(Error::Config(format!(
                    "potential.beta: expected a {0}x{0} matrix",
                    p.mu.len()
                )));
            }
        }
        if p.kind == PotentialKindName::Power && p.p.is_none() {
            return Err(Error::Config("potential.p: required for kind = \"power\"".into()));
        }
        if p.kind == PotentialKindName::Cubic && p.p.is_some_and(|q| q != 4.0) {
            return Err(Error::Config("potential.p: the cubic kind has p = 4".into()));
        }
        if let Some(sets) = &self.constraint.sets {
            if sets.len() != p.mu.len() {
                return Err(Error::Config(format!(
                    "constraint.sets: expected {} sets, one per component",
                    p.mu.len()
                )));
            }
        }
        if self.constraint.variant == VariantName::Multibump && self.constraint.sets.is_none() {
            return Err(Error::Config("constraint.sets: required for variant = \"multibump\"".into()));
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<GridDomain> {
        let g = &self.geometry;
        if let Some([a, b]) = g.interval {
            return GridDomain::interval(a, b, g.h);
        }
        let rect = |r: &[f64; 4]| Rect::new(r[0], r[1], r[2], r[3]);
        let chambers: Vec<Rect> = g.chambers.iter().map(rect).collect();
        let channels: Vec<Rect> = g.channels.iter().map(rect).collect();
        GridDomain::build_dumbbell(&chambers, &channels, g.h)
    }

    pub fn potential(&self) -> Result<Potential> {
        let p = &self.potential;
        match p.kind {
            PotentialKindName::Cubic => {
                let k = p.mu.len();
                let beta = p.beta.clone().unwrap_or_else(|| vec![vec![0.0; k]; k]);
                Potential::cubic(p.mu.clone(), beta)
            }
            PotentialKindName::Power => Potential::pure_power(p.mu.clone(), p.p.unwrap_or(4.0)),
        }
    }

    pub fn solver(&self, seed: u64) -> SolverConfig {
        let d = SolverConfig::default();
        let s = &self.solver;
        SolverConfig {
            step0: s.step0.unwrap_or(d.step0),
            armijo_c: s.armijo_c.unwrap_or(d.armijo_c),
            armijo_shrink: s.armijo_shrink.unwrap_or(d.armijo_shrink),
            grad_tol: s.grad_tol.unwrap_or(d.grad_tol),
            constraint_tol: s.constraint_tol.unwrap_or(d.constraint_tol),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
            max_backtracks: s.max_backtracks.unwrap_or(d.max_backtracks),
            seed,
        }
    }

    pub fn multiplicity(&self, seed: u64, workers: usize) -> MultiplicityConfig {
        let d = MultiplicityConfig::default();
        let e = &self.experiment;
        MultiplicityConfig {
            solver: self.solver(seed),
            ramp_width: self.geometry.ramp_width,
            seed,
            workers,
            distinct_tol: e.distinct_tol.unwrap_or(d.distinct_tol),
            retry_perturbation: e.retry_perturbation.unwrap_or(d.retry_perturbation),
            coercivity_trials: e.coercivity_trials.unwrap_or(d.coercivity_trials),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[geometry]
h = 0.125
chambers = [[0, 0, 1, 1]]

[potential]
kind = "cubic"
mu = [1.0]
"#;

    #[test]
    fn minimal_config_parses() {
        let c = RunConfig::parse(BASIC).unwrap();
        assert_eq!(c.constraint.variant, VariantName::Ground);
        assert_eq!(c.experiment.samples, 10_000);
        assert_eq!(c.domain().unwrap().len(), 49);
    }

    #[test]
    fn unknown_field_names_its_location() {
        let text = BASIC.replace("mu = [1.0]", "mu = [1.0]\nbeeta = 2");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("beeta") && err.contains("line"), "{err}");
    }

    #[test]
    fn beta_shape_is_checked() {
        let text = BASIC.replace("mu = [1.0]", "mu = [1.0, 1.0]\nbeta = [[0.0]]");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("potential.beta"), "{err}");
    }
}
