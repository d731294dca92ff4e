use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    /// `F = Σ_i (μ_i/4 u_i⁴ + Σ_{j≠i} β_ij/4 u_i² u_j²)`.
    CubicCoupled,
    /// `F = Σ_i μ_i |u_i|^p / p`.
    PurePower,
}

/// Nonlinearity `F: ℝᵏ → ℝ` with the constants entering the thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    mu: Vec<f64>,
    beta: Vec<Vec<f64>>,
    p: f64,
    c_f: f64,
    delta: f64,
    u_bar: Vec<f64>,
}

impl Potential {
    pub fn cubic(mu: Vec<f64>, beta: Vec<Vec<f64>>) -> Result<Self> {
        let k = mu.len();
        if k == 0 {
            return Err(Error::Precondition("at least one component required".into()));
        }
        if mu.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Precondition(format!("mu must be positive, got {mu:?}")));
        }
        if beta.len() != k || beta.iter().any(|r| r.len() != k) {
            return Err(Error::Precondition(format!("beta must be {k}x{k}")));
        }
        for i in 0..k {
            if beta[i][i] != 0.0 {
                return Err(Error::Precondition(format!("beta[{i}][{i}] must be zero")));
            }
            for j in 0..k {
                if beta[i][j] != beta[j][i] || !beta[i][j].is_finite() {
                    return Err(Error::Precondition(format!(
                        "beta must be symmetric and finite (entry {i},{j})"
                    )));
                }
            }
        }
        let c_f = 3.0
            * (0..k)
                .map(|i| mu[i] + beta[i].iter().map(|b| b.abs()).sum::<f64>())
                .fold(0.0, f64::max);
        Ok(Self {
            kind: PotentialKind::CubicCoupled,
            u_bar: vec![1.0; k],
            mu,
            beta,
            p: 4.0,
            c_f,
            delta: 2.0,
        })
    }

    /// Single cubic equation `-Δu = μ u³`.
    pub fn single_cubic(mu: f64) -> Result<Self> {
        Self::cubic(vec![mu], vec![vec![0.0]])
    }

    pub fn pure_power(mu: Vec<f64>, p: f64) -> Result<Self> {
        let k = mu.len();
        if k == 0 {
            return Err(Error::Precondition("at least one component required".into()));
        }
        if mu.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Precondition(format!("mu must be positive, got {mu:?}")));
        }
        if !(p > 2.0 && p.is_finite()) {
            return Err(Error::Precondition(format!("exponent must exceed 2, got {p}")));
        }
        let mmax = mu.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            kind: PotentialKind::PurePower,
            u_bar: vec![1.0; k],
            beta: vec![vec![0.0; k]; k],
            c_f: (p - 1.0).max(1.0) * k as f64 * mmax,
            delta: p - 2.0,
            mu,
            p,
        })
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }
    pub fn k(&self) -> usize {
        self.mu.len()
    }
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn c_f(&self) -> f64 {
        self.c_f
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn u_bar(&self) -> &[f64] {
        &self.u_bar
    }

    /// Largest off-diagonal coupling, `max β_ij` (0 when `k = 1`).
    pub fn beta_bar(&self) -> f64 {
        let k = self.k();
        let mut b = f64::NEG_INFINITY;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    b = b.max(self.beta[i][j]);
                }
            }
        }
        if b.is_finite() {
            b
        } else {
            0.0
        }
    }

    /// The potential seen by the components listed in `comps`, all others
    /// set to zero.
    pub fn restrict(&self, comps: &[usize]) -> Result<Self> {
        let mu: Vec<f64> = comps.iter().map(|&i| self.mu[i]).collect();
        match self.kind {
            PotentialKind::CubicCoupled => {
                let beta = comps
                    .iter()
                    .map(|&i| comps.iter().map(|&j| self.beta[i][j]).collect())
                    .collect();
                Self::cubic(mu, beta)
            }
            PotentialKind::PurePower => Self::pure_power(mu, self.p),
        }
    }

    /// `∂_i F(y)`.
    pub fn grad_i(&self, y: &[f64], i: usize) -> f64 {
        match self.kind {
            PotentialKind::CubicCoupled => {
                let yi = y[i];
                let mut s = self.mu[i] * yi * yi * yi;
                for (j, &yj) in y.iter().enumerate() {
                    if j != i {
                        s += self.beta[i][j] * yi * yj * yj;
                    }
                }
                s
            }
            PotentialKind::PurePower => {
                let yi = y[i];
                self.mu[i] * yi.abs().powf(self.p - 2.0) * yi
            }
        }
    }

    pub fn grad_into(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.grad_i(y, i);
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        match self.kind {
            // Written through the gradient so that ∇F·y = 4F holds exactly.
            PotentialKind::CubicCoupled => {
                0.25 * (0..y.len()).map(|i| y[i] * self.grad_i(y, i)).sum::<f64>()
            }
            PotentialKind::PurePower => y
                .iter()
                .zip(&self.mu)
                .map(|(v, m)| m * v.abs().powf(self.p) / self.p)
                .sum(),
        }
    }

    /// Row-major `k × k` Hessian.
    pub fn hess(&self, y: &[f64]) -> Vec<f64> {
        let k = self.k();
        let mut hm = vec![0.0; k * k];
        match self.kind {
            PotentialKind::CubicCoupled => {
                for i in 0..k {
                    let mut d = 3.0 * self.mu[i] * y[i] * y[i];
                    for j in 0..k {
                        if j != i {
                            d += self.beta[i][j] * y[j] * y[j];
                            hm[i * k + j] = 2.0 * self.beta[i][j] * y[i] * y[j];
                        }
                    }
                    hm[i * k + i] = d;
                }
            }
            PotentialKind::PurePower => {
                for i in 0..k {
                    hm[i * k + i] = self.mu[i] * (self.p - 1.0) * y[i].abs().powf(self.p - 2.0);
                }
            }
        }
        hm
    }

    /// `vᵀ D²F(y) w` without forming the matrix.
    pub fn hess_form(&self, y: &[f64], v: &[f64], w: &[f64]) -> f64 {
        let k = self.k();
        match self.kind {
            PotentialKind::CubicCoupled => {
                let mut s = 0.0;
                for i in 0..k {
                    let mut d = 3.0 * self.mu[i] * y[i] * y[i];
                    for j in 0..k {
                        if j != i {
                            d += self.beta[i][j] * y[j] * y[j];
                            s += 2.0 * self.beta[i][j] * y[i] * y[j] * v[i] * w[j];
                        }
                    }
                    s += d * v[i] * w[i];
                }
                s
            }
            PotentialKind::PurePower => (0..k)
                .map(|i| self.mu[i] * (self.p - 1.0) * y[i].abs().powf(self.p - 2.0) * v[i] * w[i])
                .sum(),
        }
    }

    /// `F(a) - F(b)`, accurate when `a` and `b` are close.
    pub fn value_diff(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            PotentialKind::CubicCoupled => {
                let k = self.k();
                let mut s = 0.0;
                for i in 0..k {
                    let (x, y) = (a[i], b[i]);
                    s += 0.25 * self.mu[i] * (x - y) * (x + y) * (x * x + y * y);
                    for j in i + 1..k {
                        let bij = self.beta[i][j];
                        if bij == 0.0 {
                            continue;
                        }
                        // a_i²a_j² - b_i²b_j² = (a_i² - b_i²)a_j² + b_i²(a_j² - b_j²)
                        let da = (a[i] - b[i]) * (a[i] + b[i]);
                        let db = (a[j] - b[j]) * (a[j] + b[j]);
                        s += 0.5 * bij * (da * a[j] * a[j] + b[i] * b[i] * db);
                    }
                }
                s
            }
            PotentialKind::PurePower => {
                let p = self.p;
                a.iter()
                    .zip(b)
                    .zip(&self.mu)
                    .map(|((&x, &y), &m)| {
                        let (x, y) = (x.abs(), y.abs());
                        let d = if y == 0.0 {
                            x.powf(p)
                        } else {
                            y.powf(p) * (p * ((x - y) / y).ln_1p()).exp_m1()
                        };
                        m * d / p
                    })
                    .sum()
            }
        }
    }
}

/// `F(y)`.
pub fn f_value(pot: &Potential, y: &[f64]) -> f64 {
    pot.value(y)
}

/// `∇F(y)`.
pub fn f_grad(pot: &Potential, y: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; y.len()];
    pot.grad_into(y, &mut g);
    g
}

/// `D²F(y)`, row-major.
pub fn f_hess(pot: &Potential, y: &[f64]) -> Vec<f64> {
    pot.hess(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segregated() -> Potential {
        Potential::cubic(vec![1.0, 1.0], vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap()
    }

    #[test]
    fn hand_values() {
        let p = segregated();
        assert_eq!(f_value(&p, &[1.0, 2.0]), 2.25);
        assert_eq!(f_grad(&p, &[1.0, 2.0])[0], -3.0);
    }

    #[test]
    fn zero_is_flat() {
        let p = segregated();
        assert_eq!(f_value(&p, &[0.0, 0.0]), 0.0);
        assert_eq!(f_grad(&p, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert!(f_hess(&p, &[0.0, 0.0]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn value_diff_matches_direct() {
        let p = Potential::cubic(vec![1.0, 2.0], vec![vec![0.0, 0.7], vec![0.7, 0.0]]).unwrap();
        let (a, b) = ([1.3, -0.4], [0.2, 2.1]);
        let d = p.value(&a) - p.value(&b);
        assert!((p.value_diff(&a, &b) - d).abs() < 1e-13);
        let q = Potential::pure_power(vec![1.0, 3.0], 3.0).unwrap();
        let d = q.value(&a) - q.value(&b);
        assert!((q.value_diff(&a, &b) - d).abs() < 1e-13);
    }

    #[test]
    fn restriction_drops_components() {
        let p = Potential::cubic(
            vec![1.0, 2.0, 3.0],
            vec![vec![0.0, -1.0, 0.5], vec![-1.0, 0.0, 0.2], vec![0.5, 0.2, 0.0]],
        )
        .unwrap();
        let r = p.restrict(&[0, 2]).unwrap();
        assert_eq!(r.value(&[1.0, 2.0]), p.value(&[1.0, 0.0, 2.0]));
    }
}
