use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Potential, PotentialKind};

const SAMPLE_RADIUS: f64 = 10.0;
const HOLD_TOL: f64 = -1e-12;

/// Worst sampled margin of one inequality. Margins are normalized by the
/// magnitude of the terms involved, so `worst_margin ≥ -1e-12` means holds.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionEntry {
    pub name: &'static str,
    pub worst_margin: f64,
    /// Unnormalized margin at the worst sample.
    pub worst_raw: f64,
    /// Largest `|raw margin|` seen, for identities such as `∇F·u = 4F`.
    pub max_abs_raw: f64,
    /// Point (and for F2 the multipliers appended) where the worst margin occurs.
    pub witness: Vec<f64>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub samples: usize,
    pub seed: u64,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn entry(&self, name: &str) -> &AssumptionEntry {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .unwrap_or_else(|| panic!("no assumption named {name}"))
    }

    /// True when F1 to F4 all hold at the sampled points.
    pub fn f_conditions_hold(&self) -> bool {
        ["F1", "F2", "F3", "F4"].iter().all(|n| self.entry(n).holds)
    }
}

struct Tracker {
    name: &'static str,
    worst: f64,
    raw: f64,
    max_abs: f64,
    witness: Vec<f64>,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            worst: f64::INFINITY,
            raw: 0.0,
            max_abs: 0.0,
            witness: Vec::new(),
        }
    }

    fn push(&mut self, raw: f64, scale: f64, at: impl FnOnce() -> Vec<f64>) {
        self.max_abs = self.max_abs.max(raw.abs());
        let m = if scale > 0.0 { raw / scale } else { raw };
        if m < self.worst {
            self.worst = m;
            self.raw = raw;
            self.witness = at();
        }
    }

    fn finish(self, strict: bool) -> AssumptionEntry {
        let worst = if self.worst.is_finite() { self.worst } else { 0.0 };
        let holds = if strict { worst > 0.0 } else { worst >= HOLD_TOL };
        AssumptionEntry {
            name: self.name,
            worst_margin: worst,
            worst_raw: self.raw,
            max_abs_raw: self.max_abs,
            witness: self.witness,
            holds,
        }
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            let r = SAMPLE_RADIUS * rng.random::<f64>();
            return v.into_iter().map(|x| x * r / n).collect();
        }
    }
}

/// Samples F1 to F4, the Ambrosetti–Rabinowitz inequality and monotonicity
/// of `t ↦ ∂_iF(te_i)t / t^{2+δ}` at `samples` random points in `|u| ≤ 10`.
pub fn check_assumptions(pot: &Potential, samples: usize, seed: u64) -> AssumptionReport {
    let k = pot.k();
    let (p, c_f, delta) = (pot.p(), pot.c_f(), pot.delta());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f1 = Tracker::new("F1");
    let mut f2 = Tracker::new("F2");
    let mut f3 = Tracker::new("F3");
    let mut ar = Tracker::new("AR");
    let mut ratio = Tracker::new("ratio");
    let mut g = vec![0.0; k];
    let mut gi = vec![0.0; k];

    for _ in 0..samples {
        let u = sample_ball(&mut rng, k);
        let lam: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        pot.grad_into(&u, &mut g);
        let hm = pot.hess(&u);
        let fv = pot.value(&u);

        let hs: f64 = hm.iter().map(|v| v.abs()).sum();
        let gs: f64 = g.iter().map(|v| v.abs()).sum();
        for (lhs, rhs) in [
            (hs, c_f * nu.powf(p - 2.0)),
            (gs, c_f * nu.powf(p - 1.0)),
            (fv.abs(), c_f * nu.powf(p)),
        ] {
            f1.push(rhs - lhs, rhs, || u.clone());
        }

        let w: Vec<f64> = (0..k).map(|i| lam[i] * u[i]).collect();
        let mut quad = 0.0;
        let mut quad_abs = 0.0;
        for i in 0..k {
            for j in 0..k {
                let t = hm[i * k + j] * w[i] * w[j];
                quad += t;
                quad_abs += t.abs();
            }
        }
        let lin: f64 = (0..k).map(|i| g[i] * lam[i] * lam[i] * u[i]).sum();
        let lin_abs: f64 = (0..k).map(|i| (g[i] * lam[i] * lam[i] * u[i]).abs()).sum();
        f2.push(quad - (1.0 + delta) * lin, quad_abs + (1.0 + delta) * lin_abs, || {
            u.iter().chain(&lam).cloned().collect()
        });

        for i in 0..k {
            let mut ui = vec![0.0; k];
            ui[i] = u[i];
            pot.grad_into(&ui, &mut gi);
            let (a, b) = (gi[i] * u[i], g[i] * u[i]);
            f3.push(a - b, a.abs() + b.abs(), || u.clone());
        }

        let gu: f64 = g.iter().zip(&u).map(|(a, b)| a * b).sum();
        ar.push(gu - (2.0 + delta) * fv, gu.abs() + (2.0 + delta) * fv.abs(), || u.clone());

        let t1 = SAMPLE_RADIUS * rng.random::<f64>();
        let t2 = SAMPLE_RADIUS * rng.random::<f64>();
        let (t1, t2) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        if t1 > 0.0 {
            for i in 0..k {
                let phi = |t: f64| {
                    let mut e = vec![0.0; k];
                    e[i] = t;
                    pot.grad_i(&e, i) * t / t.powf(2.0 + delta)
                };
                let (a, b) = (phi(t2), phi(t1));
                ratio.push(a - b, a.abs() + b.abs(), || vec![i as f64, t1, t2]);
            }
        }
    }

    let mut f4 = Tracker::new("F4");
    for i in 0..k {
        let mut e = vec![0.0; k];
        e[i] = pot.u_bar()[i];
        let v = pot.grad_i(&e, i);
        f4.push(v, v.abs(), || e.clone());
    }

    AssumptionReport {
        samples,
        seed,
        entries: vec![
            f1.finish(false),
            f2.finish(false),
            f3.finish(false),
            f4.finish(true),
            ar.finish(false),
            ratio.finish(false),
        ],
    }
}

/// `β̄ C_S(B,4)⁴ R⁴`, the bound replacing F3 when some coupling is positive.
/// `None` unless the potential is cubic with `max β_ij > 0`.
pub fn beta_surrogate(pot: &Potential, c_sob_ball_4: f64, r_cap: f64) -> Option<f64> {
    let b = pot.beta_bar();
    (pot.kind() == PotentialKind::CubicCoupled && b > 0.0)
        .then(|| b * c_sob_ball_4.powi(4) * r_cap.powi(4))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(b: f64) -> Potential {
        Potential::cubic(vec![1.0, 1.0], vec![vec![0.0, b], vec![b, 0.0]]).unwrap()
    }

    #[test]
    fn decoupled_cubic_ar_is_exact() {
        let r = check_assumptions(&pair(0.0), 2000, 7);
        assert_eq!(r.entry("AR").max_abs_raw, 0.0);
    }

    #[test]
    fn segregating_cubic_satisfies_everything() {
        let r = check_assumptions(&pair(-1.0), 2000, 7);
        for e in &r.entries {
            assert!(e.holds, "{} fails: {}", e.name, e.worst_margin);
        }
    }

    #[test]
    fn cooperative_cubic_violates_f3() {
        let r = check_assumptions(&pair(1.0), 2000, 7);
        let e = r.entry("F3");
        assert!(!e.holds);
        let u = &e.witness;
        let p = pair(1.0);
        assert!(p.grad_i(u, 0) * u[0] > p.grad_i(&[u[0], 0.0], 0) * u[0]
            || p.grad_i(u, 1) * u[1] > p.grad_i(&[0.0, u[1]], 1) * u[1]);
    }

    #[test]
    fn pure_power_ratio_monotone() {
        let p = Potential::pure_power(vec![1.0, 2.0], 3.0).unwrap();
        let r = check_assumptions(&p, 1000, 3);
        assert!(r.entry("ratio").holds);
        assert!(r.entry("AR").holds);
        assert!(r.f_conditions_hold());
    }

    #[test]
    fn surrogate_only_for_positive_coupling() {
        assert!(beta_surrogate(&pair(-1.0), 1.0, 1.0).is_none());
        assert_eq!(beta_surrogate(&pair(0.5), 2.0, 1.0), Some(8.0));
    }
}
