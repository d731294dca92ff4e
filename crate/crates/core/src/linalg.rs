//! Sparse symmetric operators and a banded Cholesky factorization.
//!
//! Every stiffness operator in the crate is a weighted graph Laplacian on a
//! set of grid nodes plus diagonal Dirichlet contributions, so it is symmetric
//! positive definite and has a small bandwidth once the nodes are numbered
//! along the short axis of their bounding box.

use crate::error::{Error, Result};

/// Symmetric sparse matrix stored as a diagonal plus adjacency lists.
#[derive(Debug, Clone)]
pub struct SparseSym {
    diag: Vec<f64>,
    off: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    pub fn new(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![Vec::new(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        self.diag[i] += v;
    }

    /// Adds `v` at (i, j) and (j, i). `i != j`.
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        debug_assert_ne!(i, j);
        for (a, b) in [(i, j), (j, i)] {
            match self.off[a].iter_mut().find(|(c, _)| *c == b) {
                Some(entry) => entry.1 += v,
                None => self.off[a].push((b, v)),
            }
        }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = self.diag[i] * x[i];
            for &(j, v) in &self.off[i] {
                s += v * x[j];
            }
            *yi = s;
        }
    }

    /// `xᵀ A y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim() {
            let mut row = self.diag[i] * y[i];
            for &(j, v) in &self.off[i] {
                row += v * y[j];
            }
            s += x[i] * row;
        }
        s
    }

    pub fn bandwidth(&self) -> usize {
        self.off
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// Principal submatrix on the indices where `keep` is true. Returns the
    /// submatrix and the map from new to old indices.
    pub fn principal(&self, keep: &[bool]) -> (SparseSym, Vec<usize>) {
        let old_of_new: Vec<usize> = (0..self.dim()).filter(|&i| keep[i]).collect();
        let mut new_of_old = vec![usize::MAX; self.dim()];
        for (n, &o) in old_of_new.iter().enumerate() {
            new_of_old[o] = n;
        }
        let mut sub = SparseSym::new(old_of_new.len());
        for (n, &o) in old_of_new.iter().enumerate() {
            sub.diag[n] = self.diag[o];
            for &(j, v) in &self.off[o] {
                let m = new_of_old[j];
                if m != usize::MAX {
                    sub.off[n].push((m, v));
                }
            }
        }
        (sub, old_of_new)
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        BandCholesky::factor(self)
    }
}

/// Cholesky factor `L` of a banded SPD matrix, `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    // Row i holds L[i][i-bw ..= i]; entries with negative column are unused.
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            data[i * w + bw] = a.diag[i];
            for &(j, v) in &a.off[i] {
                if j < i {
                    data[i * w + bw - (i - j)] = v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let jlo = j.saturating_sub(bw).max(lo);
                let mut s = data[i * w + bw - (i - j)];
                for k in jlo..j {
                    s -= data[i * w + bw - (i - k)] * data[j * w + bw - (j - k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    data[i * w + bw] = s.sqrt();
                } else {
                    data[i * w + bw - (i - j)] = s / data[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.data[i * w + bw - (i - k)] * x[k];
            }
            x[i] = s / self.data[i * w + bw];
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.data[k * w + bw - (k - i)] * x[k];
            }
            x[i] = s / self.data[i * w + bw];
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
