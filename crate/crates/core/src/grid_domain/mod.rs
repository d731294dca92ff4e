//! Discrete multi-chamber geometry on a uniform node-centered grid.
//!
//! A domain is the union of axis-aligned chamber and channel rectangles.
//! Nodes strictly inside the union are unknowns; everything else carries the
//! homogeneous Dirichlet value. Integrals are nodal sums times `h^dim`, and
//! the stiffness form is the edge sum `h^(dim-2) Σ (f_x - f_y)²`, which is the
//! five-point `-Δ` scaled by the nodal weight.

mod constants;
mod cutoff;

pub use constants::{
    compute_constants, estimate_sobolev, rebuild_threshold, sampled_weight_quotient,
    threshold_from_sobolev,
    DomainConstants, SobolevEntry,
};
pub use cutoff::{build_cutoffs, estimate_c_eta, CutoffFamily};

use std::collections::VecDeque;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{BandCholesky, SparseSym};

const NONE: usize = usize::MAX;

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }
}

/// Rectangle in grid node coordinates, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridRect {
    pub i0: usize,
    pub j0: usize,
    pub i1: usize,
    pub j1: usize,
}

impl GridRect {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.i0..=self.i1).contains(&i) && (self.j0..=self.j1).contains(&j)
    }

    fn covers_cell(&self, ci: usize, cj: usize) -> bool {
        ci >= self.i0 && ci < self.i1 && cj >= self.j0 && cj < self.j1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// A channel rectangle together with the chambers attached at its two ends
/// along `axis` (low end first).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Channel {
    pub rect: GridRect,
    pub axis: Axis,
    pub ends: [Option<usize>; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FaceSet {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl FaceSet {
    pub const ALL: FaceSet = FaceSet {
        left: true,
        right: true,
        bottom: true,
        top: true,
    };
}

/// Region on which a Sobolev constant is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    /// The whole domain Ω with Dirichlet data on ∂Ω.
    Domain,
    /// The closed chamber with 1-based id; Dirichlet faces supplied separately.
    Chamber(usize),
    /// The grid bounding box, Dirichlet on its border.
    BoundingBox,
}

impl Region {
    pub fn key(&self) -> String {
        match self {
            Region::Domain => "domain".to_string(),
            Region::Chamber(l) => format!("chamber{l}"),
            Region::BoundingBox => "ball".to_string(),
        }
    }
}

/// Stiffness operator on the unknown nodes of a region, with nodal mass.
#[derive(Debug, Clone)]
pub struct RegionOperator {
    pub stiffness: SparseSym,
    pub nodes: Vec<(usize, usize)>,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct GridDomain {
    dim: usize,
    nx: usize,
    ny: usize,
    h: f64,
    origin: [f64; 2],
    label: Vec<i32>,
    index: Vec<usize>,
    nodes: Vec<(usize, usize)>,
    chambers: Vec<GridRect>,
    channels: Vec<Channel>,
    stiffness: SparseSym,
    factor: OnceLock<BandCholesky>,
}

fn snap_exact(v: f64, h: f64, what: &str) -> Result<i64> {
    let s = v / h;
    let r = s.round();
    if (s - r).abs() > 1e-9 * r.abs().max(1.0) {
        return Err(Error::Resolution(format!(
            "{what} coordinate {v} is not a multiple of h = {h}"
        )));
    }
    Ok(r as i64)
}

/// Order nodes so that the fast index runs along the shorter side, which
/// keeps the stiffness bandwidth at the short dimension.
fn ordered(mut nodes: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    let (imin, imax) = nodes.iter().fold((usize::MAX, 0), |(a, b), n| (a.min(n.0), b.max(n.0)));
    let (jmin, jmax) = nodes.iter().fold((usize::MAX, 0), |(a, b), n| (a.min(n.1), b.max(n.1)));
    if imax.saturating_sub(imin) >= jmax.saturating_sub(jmin) {
        nodes.sort_by_key(|&(i, j)| (i, j));
    } else {
        nodes.sort_by_key(|&(i, j)| (j, i));
    }
    nodes
}

impl GridDomain {
    /// Builds a two-dimensional multi-chamber domain.
    ///
    /// Chamber coordinates must be multiples of `h` (relative to the lowest
    /// chamber corner). Channel coordinates are rounded to the nearest grid
    /// line, so a channel of width 0.1 at `h = 1/32` is resolved with the
    /// closest representable width.
    pub fn build_dumbbell(chambers: &[Rect], channels: &[Rect], h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Resolution(format!("grid spacing must be positive, got {h}")));
        }
        if chambers.is_empty() {
            return Err(Error::Geometry("at least one chamber is required".into()));
        }
        for r in chambers.iter().chain(channels) {
            if !(r.x1 > r.x0 && r.y1 > r.y0) {
                return Err(Error::Geometry(format!("degenerate rectangle {r:?}")));
            }
        }
        let ox = chambers.iter().map(|r| r.x0).fold(f64::INFINITY, f64::min);
        let oy = chambers.iter().map(|r| r.y0).fold(f64::INFINITY, f64::min);

        let mut raw_ch = Vec::with_capacity(chambers.len());
        for (n, r) in chambers.iter().enumerate() {
            let what = format!("chamber {}", n + 1);
            raw_ch.push([
                snap_exact(r.x0 - ox, h, &what)?,
                snap_exact(r.y0 - oy, h, &what)?,
                snap_exact(r.x1 - ox, h, &what)?,
                snap_exact(r.y1 - oy, h, &what)?,
            ]);
        }
        let mut raw_cn = Vec::with_capacity(channels.len());
        for (n, r) in channels.iter().enumerate() {
            let c = [
                ((r.x0 - ox) / h).round() as i64,
                ((r.y0 - oy) / h).round() as i64,
                ((r.x1 - ox) / h).round() as i64,
                ((r.y1 - oy) / h).round() as i64,
            ];
            if c[2] <= c[0] || c[3] <= c[1] {
                return Err(Error::Resolution(format!(
                    "channel {} is thinner than one grid cell at h = {h}",
                    n + 1
                )));
            }
            raw_cn.push(c);
        }
        let all = raw_ch.iter().chain(&raw_cn);
        let imin = all.clone().map(|c| c[0]).min().unwrap();
        let jmin = all.clone().map(|c| c[1]).min().unwrap();
        let imax = all.clone().map(|c| c[2]).max().unwrap();
        let jmax = all.map(|c| c[3]).max().unwrap();
        let to_rect = |c: &[i64; 4]| GridRect {
            i0: (c[0] - imin) as usize,
            j0: (c[1] - jmin) as usize,
            i1: (c[2] - imin) as usize,
            j1: (c[3] - jmin) as usize,
        };
        let ch: Vec<GridRect> = raw_ch.iter().map(to_rect).collect();
        let cn: Vec<GridRect> = raw_cn.iter().map(to_rect).collect();
        let nx = (imax - imin) as usize + 1;
        let ny = (jmax - jmin) as usize + 1;
        let origin = [ox + imin as f64 * h, oy + jmin as f64 * h];

        for a in 0..ch.len() {
            for b in a + 1..ch.len() {
                let (p, q) = (ch[a], ch[b]);
                let disjoint = p.i1 < q.i0 || q.i1 < p.i0 || p.j1 < q.j0 || q.j1 < p.j0;
                if !disjoint {
                    return Err(Error::Geometry(format!(
                        "chambers {} and {} overlap or touch",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }

        let covered = |ci: usize, cj: usize| ch.iter().chain(&cn).any(|r| r.covers_cell(ci, cj));
        let mut label = vec![-1i32; nx * ny];
        for j in 1..ny.saturating_sub(1) {
            for i in 1..nx.saturating_sub(1) {
                let inside = covered(i - 1, j - 1) && covered(i, j - 1) && covered(i - 1, j) && covered(i, j);
                if inside {
                    label[j * nx + i] = ch
                        .iter()
                        .position(|r| r.contains(i, j))
                        .map_or(0, |l| l as i32 + 1);
                }
            }
        }

        let mut channels_out = Vec::with_capacity(cn.len());
        for (n, r) in cn.iter().enumerate() {
            let find = |face: Axis, coord: usize, lo_end: bool| {
                ch.iter().position(|c| match face {
                    Axis::X => {
                        let face_x = if lo_end { c.i1 } else { c.i0 };
                        face_x == coord && c.j0 <= r.j0 && r.j1 <= c.j1
                    }
                    Axis::Y => {
                        let face_y = if lo_end { c.j1 } else { c.j0 };
                        face_y == coord && c.i0 <= r.i0 && r.i1 <= c.i1
                    }
                })
            };
            let x_ends = [find(Axis::X, r.i0, true), find(Axis::X, r.i1, false)];
            let y_ends = [find(Axis::Y, r.j0, true), find(Axis::Y, r.j1, false)];
            let has_x = x_ends.iter().any(Option::is_some);
            let has_y = y_ends.iter().any(Option::is_some);
            let (axis, ends) = match (has_x, has_y) {
                (true, false) => (Axis::X, x_ends),
                (false, true) => (Axis::Y, y_ends),
                (false, false) => {
                    return Err(Error::Geometry(format!(
                        "channel {} does not attach to any chamber face",
                        n + 1
                    )))
                }
                (true, true) => {
                    return Err(Error::Geometry(format!(
                        "channel {} attaches along both axes",
                        n + 1
                    )))
                }
            };
            channels_out.push(Channel {
                rect: *r,
                axis,
                ends: ends.map(|e| e.map(|l| l + 1)),
            });
        }

        Self::finish(2, nx, ny, h, origin, label, ch, channels_out)
    }

    /// One-dimensional interval `(x0, x1)` as a single chamber.
    pub fn interval(x0: f64, x1: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && x1 > x0) {
            return Err(Error::Geometry(format!("invalid interval ({x0}, {x1}) with h = {h}")));
        }
        let n = snap_exact(x1 - x0, h, "interval")? as usize;
        if n < 2 {
            return Err(Error::Resolution("interval has no interior node".into()));
        }
        let mut label = vec![-1; n + 1];
        for l in label.iter_mut().take(n).skip(1) {
            *l = 1;
        }
        let rect = GridRect { i0: 0, j0: 0, i1: n, j1: 0 };
        Self::finish(1, n + 1, 1, h, [x0, 0.0], label, vec![rect], Vec::new())
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        dim: usize,
        nx: usize,
        ny: usize,
        h: f64,
        origin: [f64; 2],
        label: Vec<i32>,
        chambers: Vec<GridRect>,
        channels: Vec<Channel>,
    ) -> Result<Self> {
        let raw: Vec<(usize, usize)> = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .filter(|&(i, j)| label[j * nx + i] >= 0)
            .collect();
        if raw.is_empty() {
            return Err(Error::Geometry("domain has no interior nodes".into()));
        }
        let nodes = ordered(raw);
        let mut index = vec![NONE; nx * ny];
        for (k, &(i, j)) in nodes.iter().enumerate() {
            index[j * nx + i] = k;
        }
        let mut dom = Self {
            dim,
            nx,
            ny,
            h,
            origin,
            label,
            index,
            nodes,
            chambers,
            channels,
            stiffness: SparseSym::new(0),
            factor: OnceLock::new(),
        };
        dom.validate()?;
        dom.stiffness = dom.assemble_stiffness();
        Ok(dom)
    }

    fn validate(&self) -> Result<()> {
        for (l, r) in self.chambers.iter().enumerate() {
            let any = self
                .nodes
                .iter()
                .any(|&(i, j)| r.contains(i, j) && self.label_at(i, j) == l as i32 + 1);
            if !any {
                return Err(Error::Resolution(format!(
                    "chamber {} contains no interior node",
                    l + 1
                )));
            }
        }
        for &(i, j) in &self.nodes {
            let a = self.label_at(i, j);
            for (p, q) in self.grid_neighbors(i, j) {
                let b = self.label_at(p, q);
                if a >= 1 && b >= 1 && a != b {
                    return Err(Error::Geometry(format!(
                        "chambers {a} and {b} are adjacent at node ({i}, {j})"
                    )));
                }
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for n in self.neighbors(k).into_iter().flatten() {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Geometry("interior is not connected".into()));
        }
        Ok(())
    }

    fn assemble_stiffness(&self) -> SparseSym {
        let s = self.stiffness_scale();
        let mut a = SparseSym::new(self.nodes.len());
        for k in 0..self.nodes.len() {
            a.add_diag(k, 2.0 * self.dim as f64 * s);
            for n in self.neighbors(k).into_iter().flatten() {
                if n > k {
                    a.add_sym(k, n, -s);
                }
            }
        }
        a
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }
    pub fn n_chambers(&self) -> usize {
        self.chambers.len()
    }
    pub fn chambers(&self) -> &[GridRect] {
        &self.chambers
    }
    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }
    /// Number of unknowns (interior nodes).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[(usize, usize)] {
        &self.nodes
    }

    /// Nodal quadrature weight `h^dim`.
    pub fn mass(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Edge weight of the stiffness form, `h^(dim-2)`.
    pub fn stiffness_scale(&self) -> f64 {
        self.h.powi(self.dim as i32 - 2)
    }

    pub fn label_at(&self, i: usize, j: usize) -> i32 {
        self.label[j * self.nx + i]
    }

    /// Label of interior node `k`: chamber id ≥ 1, or 0 for the connecting set.
    pub fn label(&self, k: usize) -> i32 {
        let (i, j) = self.nodes[k];
        self.label_at(i, j)
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.index[j * self.nx + i] != NONE
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let k = self.index[j * self.nx + i];
        (k != NONE).then_some(k)
    }

    pub fn position(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.nodes[k];
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    fn grid_neighbors(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(4);
        if i > 0 {
            out.push((i - 1, j));
        }
        if i + 1 < self.nx {
            out.push((i + 1, j));
        }
        if self.dim == 2 {
            if j > 0 {
                out.push((i, j - 1));
            }
            if j + 1 < self.ny {
                out.push((i, j + 1));
            }
        }
        out
    }

    /// Interior neighbors of node `k` (`None` where the neighbor is boundary).
    pub fn neighbors(&self, k: usize) -> Vec<Option<usize>> {
        let (i, j) = self.nodes[k];
        self.grid_neighbors(i, j)
            .into_iter()
            .map(|(p, q)| self.index_of(p, q))
            .collect()
    }

    /// Pairs of interior nodes joined by a grid edge, each pair once.
    pub fn interior_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.nodes.len() {
            for n in self.neighbors(k).into_iter().flatten() {
                if n > k {
                    out.push((k, n));
                }
            }
        }
        out
    }

    pub fn stiffness(&self) -> &SparseSym {
        &self.stiffness
    }

    pub fn stiffness_apply(&self, f: &[f64]) -> Vec<f64> {
        self.stiffness.apply(f)
    }

    /// `⟨f, g⟩ = ∫ ∇f·∇g` in the discrete stiffness form.
    pub fn stiffness_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.stiffness.inner(f, g)
    }

    pub fn factor(&self) -> &BandCholesky {
        self.factor.get_or_init(|| {
            self.stiffness
                .cholesky()
                .expect("grid stiffness is positive definite by construction")
        })
    }

    /// Riesz representative: solves `K r = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor().solve(rhs)
    }

    /// `|D|`, the measure of the connecting set.
    pub fn d_measure(&self) -> f64 {
        (0..self.len()).filter(|&k| self.label(k) == 0).count() as f64 * self.mass()
    }

    /// Interior nodes carrying label `l`.
    pub fn chamber_nodes(&self, l: usize) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.label(k) == l as i32).collect()
    }

    /// Faces of chamber `l` that no channel attaches to.
    pub fn gamma_faces(&self, l: usize) -> FaceSet {
        let mut faces = FaceSet::ALL;
        for c in &self.channels {
            for (end, &att) in c.ends.iter().enumerate() {
                if att != Some(l) {
                    continue;
                }
                match (c.axis, end) {
                    (Axis::X, 0) => faces.right = false,
                    (Axis::X, _) => faces.left = false,
                    (Axis::Y, 0) => faces.top = false,
                    (Axis::Y, _) => faces.bottom = false,
                }
            }
        }
        if self.dim == 1 {
            faces.bottom = false;
            faces.top = false;
        }
        faces
    }

    /// `∫_{Ω_l} |∇f|²`: stiffness edge sum over grid edges inside the closed
    /// chamber rectangle; values off the interior count as zero.
    pub fn chamber_energy(&self, l: usize, f: &[f64]) -> f64 {
        let r = self.chambers[l - 1];
        let val = |i: usize, j: usize| self.index_of(i, j).map_or(0.0, |k| f[k]);
        let mut s = 0.0;
        for j in r.j0..=r.j1 {
            for i in r.i0..=r.i1 {
                let v = val(i, j);
                if i < r.i1 {
                    let d = v - val(i + 1, j);
                    s += d * d;
                }
                if self.dim == 2 && j < r.j1 {
                    let d = v - val(i, j + 1);
                    s += d * d;
                }
            }
        }
        s * self.stiffness_scale()
    }

    /// Stiffness and node list for the Sobolev quotient on `region`.
    /// For chambers, `dirichlet` selects the faces carrying zero data; the
    /// other faces are free.
    pub fn region_operator(&self, region: Region, dirichlet: FaceSet) -> Result<RegionOperator> {
        #[derive(Clone, Copy, PartialEq)]
        enum Kind {
            Outside,
            Zero,
            Unknown,
        }
        let (nx, ny) = (self.nx, self.ny);
        let kind = |i: usize, j: usize| -> Kind {
            match region {
                Region::Domain => {
                    if self.is_interior(i, j) {
                        Kind::Unknown
                    } else {
                        Kind::Zero
                    }
                }
                Region::BoundingBox => {
                    let border = i == 0 || i + 1 == nx || (self.dim == 2 && (j == 0 || j + 1 == ny));
                    if border {
                        Kind::Zero
                    } else {
                        Kind::Unknown
                    }
                }
                Region::Chamber(l) => {
                    let r = self.chambers[l - 1];
                    if !r.contains(i, j) {
                        return Kind::Outside;
                    }
                    let on = (dirichlet.left && i == r.i0)
                        || (dirichlet.right && i == r.i1)
                        || (self.dim == 2 && dirichlet.bottom && j == r.j0)
                        || (self.dim == 2 && dirichlet.top && j == r.j1);
                    if on {
                        Kind::Zero
                    } else {
                        Kind::Unknown
                    }
                }
            }
        };
        if let Region::Chamber(l) = region {
            if l == 0 || l > self.n_chambers() {
                return Err(Error::Precondition(format!("no chamber {l}")));
            }
        }
        let raw: Vec<(usize, usize)> = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .filter(|&(i, j)| kind(i, j) == Kind::Unknown)
            .collect();
        if raw.is_empty() {
            return Err(Error::Precondition(format!("region {} is empty", region.key())));
        }
        let nodes = ordered(raw);
        let mut idx = vec![NONE; nx * ny];
        for (k, &(i, j)) in nodes.iter().enumerate() {
            idx[j * nx + i] = k;
        }
        let s = self.stiffness_scale();
        let mut a = SparseSym::new(nodes.len());
        let mut anchored = false;
        let mut edge = |p: (usize, usize), q: (usize, usize)| {
            let (kp, kq) = (kind(p.0, p.1), kind(q.0, q.1));
            if kp == Kind::Outside || kq == Kind::Outside {
                return;
            }
            anchored |= (kp == Kind::Zero) != (kq == Kind::Zero);
            let (ip, iq) = (idx[p.1 * nx + p.0], idx[q.1 * nx + q.0]);
            if ip != NONE {
                a.add_diag(ip, s);
            }
            if iq != NONE {
                a.add_diag(iq, s);
            }
            if ip != NONE && iq != NONE {
                a.add_sym(ip, iq, -s);
            }
        };
        for j in 0..ny {
            for i in 0..nx {
                if i + 1 < nx {
                    edge((i, j), (i + 1, j));
                }
                if self.dim == 2 && j + 1 < ny {
                    edge((i, j), (i, j + 1));
                }
            }
        }
        if !anchored {
            return Err(Error::Precondition(format!(
                "region {} has no Dirichlet part; the quotient is unbounded",
                region.key()
            )));
        }
        Ok(RegionOperator {
            stiffness: a,
            nodes,
            mass: self.mass(),
        })
    }

    /// Domain consisting of the open chamber `l` alone, plus the grid offset
    /// of its node (0, 0) inside `self`.
    pub fn chamber_subdomain(&self, l: usize) -> Result<(GridDomain, (usize, usize))> {
        let r = self.chambers[l - 1];
        if self.dim == 1 {
            return Ok((self.clone(), (0, 0)));
        }
        let x0 = self.origin[0] + r.i0 as f64 * self.h;
        let y0 = self.origin[1] + r.j0 as f64 * self.h;
        let rect = Rect::new(
            x0,
            y0,
            x0 + (r.i1 - r.i0) as f64 * self.h,
            y0 + (r.j1 - r.j0) as f64 * self.h,
        );
        let sub = GridDomain::build_dumbbell(&[rect], &[], self.h)?;
        Ok((sub, (r.i0, r.j0)))
    }

    /// Extends a nodal vector of `sub` (placed at `offset`) by zero to `self`.
    pub fn embed(&self, sub: &GridDomain, offset: (usize, usize), f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, &(i, j)) in sub.nodes.iter().enumerate() {
            if let Some(n) = self.index_of(i + offset.0, j + offset.1) {
                out[n] = f[k];
            }
        }
        out
    }

    /// Full `ny × nx` grid (row-major, row = y index) with zero off the interior.
    pub fn to_grid(&self, f: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nx * self.ny];
        for (k, &(i, j)) in self.nodes.iter().enumerate() {
            g[j * self.nx + i] = f[k];
        }
        g
    }

    pub fn from_grid(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.nx * self.ny {
            return Err(Error::Precondition(format!(
                "grid has {} values, expected {}",
                g.len(),
                self.nx * self.ny
            )));
        }
        for (p, &v) in g.iter().enumerate() {
            if self.index[p] == NONE && v != 0.0 {
                return Err(Error::Precondition(format!(
                    "nonzero value {v} at boundary node ({}, {})",
                    p % self.nx,
                    p / self.nx
                )));
            }
        }
        Ok(self.nodes.iter().map(|&(i, j)| g[j * self.nx + i]).collect())
    }
}

/// `(-Δf)` by the five-point stencil, with exterior neighbors read as zero.
pub fn apply_laplacian(dom: &GridDomain, f: &[f64]) -> Vec<f64> {
    let inv = 1.0 / dom.mass();
    dom.stiffness_apply(f).into_iter().map(|v| v * inv).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dumbbell(width: f64, h: f64) -> GridDomain {
        GridDomain::build_dumbbell(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.5, 0.0, 2.5, 1.0)],
            &[Rect::new(1.0, 0.5 - width / 2.0, 1.5, 0.5 + width / 2.0)],
            h,
        )
        .unwrap()
    }

    #[test]
    fn unit_square_quarter_grid() {
        let d = GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], 0.25).unwrap();
        assert_eq!(d.len(), 9);
        assert_eq!((d.nx(), d.ny()), (5, 5));
        assert!((0..9).all(|k| d.label(k) == 1));
    }

    #[test]
    fn dumbbell_measure_counts_channel_nodes() {
        let h = 1.0 / 32.0;
        let d = dumbbell(0.1, h);
        assert_eq!(d.n_chambers(), 2);
        // channel [1, 1.5] x [0.4375, 0.5625] after rounding: 15 columns x 3 rows
        let count = (0..d.len()).filter(|&k| d.label(k) == 0).count();
        assert_eq!(count, 45);
        assert!((d.d_measure() - 45.0 * h * h).abs() < 1e-15);
        assert!((d.d_measure() - 0.05).abs() < 0.1 * 2.0 * h);
        assert_eq!(d.channels()[0].axis, Axis::X);
        assert_eq!(d.channels()[0].ends, [Some(1), Some(2)]);
    }

    #[test]
    fn separated_chambers_are_disconnected() {
        let e = GridDomain::build_dumbbell(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(0.5, 2.0, 1.5, 3.0)],
            &[],
            0.25,
        );
        assert!(matches!(e, Err(Error::Geometry(_))));
    }

    #[test]
    fn overlapping_chambers_rejected() {
        let e = GridDomain::build_dumbbell(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(0.5, 0.5, 1.5, 1.5)],
            &[],
            0.25,
        );
        assert!(matches!(e, Err(Error::Geometry(_))));
    }

    #[test]
    fn incommensurate_chamber_rejected() {
        let e = GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 0.9)], &[], 0.25);
        assert!(matches!(e, Err(Error::Resolution(_))));
    }

    #[test]
    fn chambers_never_adjacent() {
        let d = dumbbell(0.1, 1.0 / 16.0);
        for k in 0..d.len() {
            for n in d.neighbors(k).into_iter().flatten() {
                let (a, b) = (d.label(k), d.label(n));
                assert!(!(a >= 1 && b >= 1 && a != b));
            }
        }
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let d = dumbbell(0.25, 1.0 / 8.0);
        assert!(apply_laplacian(&d, &vec![0.0; d.len()]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_point_interval_laplacian() {
        let d = GridDomain::interval(0.0, 1.0, 0.5).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(apply_laplacian(&d, &[1.0]), vec![8.0]);
    }

    #[test]
    fn sine_mode_is_second_order() {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let d = GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], h).unwrap();
            let pi = std::f64::consts::PI;
            let f: Vec<f64> = (0..d.len())
                .map(|k| {
                    let [x, y] = d.position(k);
                    (pi * x).sin() * (pi * y).sin()
                })
                .collect();
            let lf = apply_laplacian(&d, &f);
            let num: f64 = lf.iter().zip(&f).map(|(a, b)| (a - 2.0 * pi * pi * b).powi(2)).sum();
            let den: f64 = f.iter().map(|b| (2.0 * pi * pi * b).powi(2)).sum();
            (num / den).sqrt()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 < 0.01);
        let ratio = e1 / e2;
        assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn chamber_energy_sums_to_total_without_channel() {
        let d = GridDomain::build_dumbbell(&[Rect::new(0.0, 0.0, 1.0, 1.0)], &[], 0.125).unwrap();
        let f: Vec<f64> = (0..d.len()).map(|k| (k as f64 * 0.3).cos() + 1.1).collect();
        let total = d.stiffness_inner(&f, &f);
        assert!((d.chamber_energy(1, &f) - total).abs() < 1e-12 * total);
    }

    #[test]
    fn gamma_faces_exclude_channel_side() {
        let d = dumbbell(0.1, 1.0 / 16.0);
        let g1 = d.gamma_faces(1);
        assert!(!g1.right && g1.left && g1.top && g1.bottom);
        let g2 = d.gamma_faces(2);
        assert!(!g2.left && g2.right);
    }

    #[test]
    fn embed_places_chamber_solution() {
        let d = dumbbell(0.25, 1.0 / 8.0);
        let (sub, off) = d.chamber_subdomain(2).unwrap();
        let f = vec![1.0; sub.len()];
        let e = d.embed(&sub, off, &f);
        let n2 = e.iter().filter(|&&v| v == 1.0).count();
        assert_eq!(n2, sub.len());
        for (k, &v) in e.iter().enumerate() {
            if v != 0.0 {
                assert_eq!(d.label(k), 2);
            }
        }
    }
}
