use std::f64::consts::FRAC_PI_2;

use super::{Axis, GridDomain};
use crate::error::{Error, Result};
use crate::linalg::dot;

/// Cutoffs `η_l` and their squared gradients at interior nodes.
#[derive(Debug, Clone)]
pub struct CutoffFamily {
    pub ramp_width: f64,
    /// `eta[l-1][k]` is `η_l` at interior node `k`.
    pub eta: Vec<Vec<f64>>,
    /// `|∇η_l|²` at interior node `k`.
    pub grad_sq: Vec<Vec<f64>>,
}

impl CutoffFamily {
    pub fn eta(&self, l: usize) -> &[f64] {
        &self.eta[l - 1]
    }
    pub fn grad_sq(&self, l: usize) -> &[f64] {
        &self.grad_sq[l - 1]
    }
    pub fn n(&self) -> usize {
        self.eta.len()
    }
}

fn ramp(d: f64, w: f64) -> f64 {
    if d >= w {
        0.0
    } else {
        (FRAC_PI_2 * d / w).cos().powi(2)
    }
}

/// Cosine cutoffs: `η_l = 1` on chamber `l`, `cos²(π d / 2w)` at distance `d`
/// into an attached channel, zero beyond `w`.
pub fn build_cutoffs(dom: &GridDomain, ramp_width: f64) -> Result<CutoffFamily> {
    if !(ramp_width > 0.0 && ramp_width.is_finite()) {
        return Err(Error::Precondition(format!("ramp width must be positive, got {ramp_width}")));
    }
    let h = dom.h();
    for (c, ch) in dom.channels().iter().enumerate() {
        let r = ch.rect;
        let len = match ch.axis {
            Axis::X => (r.i1 - r.i0) as f64 * h,
            Axis::Y => (r.j1 - r.j0) as f64 * h,
        };
        let both = ch.ends.iter().all(Option::is_some);
        let limit = if both { 0.5 * len } else { len };
        if ramp_width >= limit {
            return Err(Error::CutoffOverlap(format!(
                "ramp width {ramp_width} must be below {limit} for channel {}",
                c + 1
            )));
        }
    }

    let n = dom.n_chambers();
    let mut eta = vec![vec![0.0f64; dom.len()]; n];
    for (k, &(i, j)) in dom.nodes().iter().enumerate() {
        let lab = dom.label(k);
        if lab >= 1 {
            eta[lab as usize - 1][k] = 1.0;
            continue;
        }
        for ch in dom.channels() {
            let r = ch.rect;
            if !r.contains(i, j) {
                continue;
            }
            for (end, att) in ch.ends.iter().enumerate() {
                let Some(l) = *att else { continue };
                let steps = match (ch.axis, end) {
                    (Axis::X, 0) => i - r.i0,
                    (Axis::X, _) => r.i1 - i,
                    (Axis::Y, 0) => j - r.j0,
                    (Axis::Y, _) => r.j1 - j,
                };
                let v = ramp(steps as f64 * h, ramp_width);
                let e = &mut eta[l - 1][k];
                *e = (*e).max(v);
            }
        }
    }

    let inv_h2 = 1.0 / (h * h);
    let grad_sq = eta
        .iter()
        .map(|e| {
            (0..dom.len())
                .map(|k| {
                    let s: f64 = dom
                        .neighbors(k)
                        .into_iter()
                        .flatten()
                        .map(|m| (e[k] - e[m]).powi(2))
                        .sum();
                    0.5 * s * inv_h2
                })
                .collect()
        })
        .collect();
    Ok(CutoffFamily { ramp_width, eta, grad_sq })
}

const C_ETA_MAX_ITERS: usize = 10_000;
const C_ETA_TOL: f64 = 1e-10;

/// Largest `∫ w_l φ² / ∫ |∇φ|²` over `l`, with `w_l = |∇η_l|²`, by power
/// iteration on `K⁻¹ W_l` from a positive start.
pub fn estimate_c_eta(dom: &GridDomain, cuts: &CutoffFamily) -> Result<f64> {
    let m = dom.mass();
    let mut best = 0.0f64;
    for w in &cuts.grad_sq {
        if w.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut x = vec![1.0; dom.len()];
        let mut q_old = f64::NAN;
        let mut converged = false;
        for _ in 0..C_ETA_MAX_ITERS {
            let wx: Vec<f64> = w.iter().zip(&x).map(|(a, b)| m * a * b).collect();
            let y = dom.solve(&wx);
            let ky = dom.stiffness_apply(&y);
            let nk = dot(&y, &ky).sqrt();
            x = y.into_iter().map(|v| v / nk).collect();
            let q: f64 = m * w.iter().zip(&x).map(|(a, b)| a * b * b).sum::<f64>();
            if (q - q_old).abs() <= C_ETA_TOL * q.abs() {
                q_old = q;
                converged = true;
                break;
            }
            q_old = q;
        }
        if !converged {
            return Err(Error::Estimation {
                what: "C_eta",
                iterations: C_ETA_MAX_ITERS,
                last: q_old,
            });
        }
        best = best.max(q_old);
    }
    Ok(best)
}
