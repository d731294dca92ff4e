use crate::grid_domain::GridDomain;
use crate::linalg::dot;

/// `k`-component nodal field on the interior nodes of a domain. Boundary
/// values are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    comps: Vec<Vec<f64>>,
}

impl Field {
    pub fn zeros(k: usize, n: usize) -> Self {
        Self { comps: vec![vec![0.0; n]; k] }
    }

    /// Panics if the components have different lengths.
    pub fn from_components(comps: Vec<Vec<f64>>) -> Self {
        if let Some(first) = comps.first() {
            assert!(comps.iter().all(|c| c.len() == first.len()), "ragged field");
        }
        Self { comps }
    }

    pub fn k(&self) -> usize {
        self.comps.len()
    }

    /// Number of nodes per component.
    pub fn n(&self) -> usize {
        self.comps.first().map_or(0, Vec::len)
    }

    pub fn comp(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    pub fn comp_mut(&mut self, i: usize) -> &mut Vec<f64> {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    /// Values of all components at node `x`.
    pub fn at(&self, x: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c[x];
        }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, s: f64) {
        self.comps.iter_mut().flatten().for_each(|v| *v *= s);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut f = self.clone();
        f.scale(s);
        f
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        for (c, o) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in c.iter_mut().zip(o) {
                *x += a * y;
            }
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        let mut f = self.clone();
        f.axpy(-1.0, other);
        f
    }

    /// Replaces every negative value by zero.
    pub fn clamp_nonnegative(&mut self) {
        self.comps.iter_mut().flatten().for_each(|v| *v = v.max(0.0));
    }

    /// Euclidean inner product of the nodal vectors.
    pub fn euclid(&self, other: &Field) -> f64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| dot(a, b)).sum()
    }

    /// `⟨u, v⟩ = Σ_i ∫ ∇u_i·∇v_i`.
    pub fn inner(&self, dom: &GridDomain, other: &Field) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| dom.stiffness_inner(a, b))
            .sum()
    }

    /// `‖u‖² = Σ_i ∫ |∇u_i|²`.
    pub fn norm_sq(&self, dom: &GridDomain) -> f64 {
        self.inner(dom, self)
    }

    pub fn norm(&self, dom: &GridDomain) -> f64 {
        self.norm_sq(dom).sqrt()
    }

    /// `‖u_i‖²`.
    pub fn comp_norm_sq(&self, dom: &GridDomain, i: usize) -> f64 {
        dom.stiffness_inner(&self.comps[i], &self.comps[i])
    }

    /// `(∫ |u|²)^{1/2}`, summing all components.
    pub fn l2_norm(&self, dom: &GridDomain) -> f64 {
        (dom.mass() * self.euclid(self)).sqrt()
    }

    /// Applies the stiffness operator componentwise.
    pub fn stiffness(&self, dom: &GridDomain) -> Field {
        Field {
            comps: self.comps.iter().map(|c| dom.stiffness_apply(c)).collect(),
        }
    }

    /// Solves `K r_i = self_i` componentwise.
    pub fn riesz(&self, dom: &GridDomain) -> Field {
        Field {
            comps: self.comps.iter().map(|c| dom.solve(c)).collect(),
        }
    }

    /// Smallest value over all components.
    pub fn min_value(&self) -> f64 {
        self.comps.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    }
}
