//! Convex domains in `R^n` and uniform lattices over them.

use crate::linalg;
use crate::{Error, Result};

/// Slack used by the inside/outside tests of the node classification.
pub const CLASSIFY_SLACK: f64 = 1e-12;
/// Tolerance for "p lies on the boundary".
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Largest facet count accepted for polytopes (vertex enumeration is combinatorial).
pub const MAX_FACETS: usize = 64;

/// Closed half-space `{x : ⟨normal, x⟩ <= offset}` with outward unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }
}

/// Oriented hyperplane with inward unit normal. `distance(y) = ⟨normal, y⟩ - offset`
/// is nonnegative on the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    #[inline]
    pub fn distance(&self, y: &[f64]) -> f64 {
        dot(&self.normal, y) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexDomain {
    Box { min: Vec<f64>, max: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polytope { faces: Vec<HalfSpace>, vertices: Vec<Vec<f64>> },
}

impl ConvexDomain {
    pub fn new_box(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() || min.is_empty() {
            return Err(Error::InvalidDomain("box corners must have equal nonzero length".into()));
        }
        if min.iter().chain(&max).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain("box corners must be finite".into()));
        }
        if min.iter().zip(&max).any(|(a, b)| a >= b) {
            return Err(Error::InvalidDomain("box has empty interior".into()));
        }
        Ok(ConvexDomain::Box { min, max })
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain("ball center must be a finite vector".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDomain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(ConvexDomain::Ball { center, radius })
    }

    /// Intersection of half-spaces. Fails with [`Error::UnboundedDomain`] when
    /// the intersection is unbounded.
    pub fn new_polytope(faces: Vec<HalfSpace>) -> Result<Self> {
        let n = faces.first().map(|f| f.normal.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidDomain("polytope needs at least one half-space".into()));
        }
        if faces.len() > MAX_FACETS {
            return Err(Error::InvalidDomain(format!("polytope has more than {MAX_FACETS} facets")));
        }
        for (k, f) in faces.iter().enumerate() {
            if f.normal.len() != n {
                return Err(Error::InvalidDomain(format!("half-space {k} has wrong dimension")));
            }
            if f.normal.iter().any(|v| !v.is_finite()) || !f.offset.is_finite() {
                return Err(Error::InvalidDomain(format!("half-space {k} is not finite")));
            }
            if (linalg::norm(&f.normal) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidDomain(format!("half-space {k} normal is not unit length")));
            }
        }
        if has_recession_direction(&faces, n) {
            return Err(Error::UnboundedDomain);
        }
        let vertices = enumerate_vertices(&faces, n);
        if vertices.len() < n + 1 {
            return Err(Error::InvalidDomain("polytope has empty interior".into()));
        }
        let mut centroid = vec![0.0; n];
        for v in &vertices {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / vertices.len() as f64;
            }
        }
        let gap = faces.iter().map(|f| f.value(&centroid)).fold(f64::NEG_INFINITY, f64::max);
        if gap > -CLASSIFY_SLACK {
            return Err(Error::InvalidDomain("polytope has empty interior".into()));
        }
        Ok(ConvexDomain::Polytope { faces, vertices })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexDomain::Box { min, .. } => min.len(),
            ConvexDomain::Ball { center, .. } => center.len(),
            ConvexDomain::Polytope { faces, .. } => faces[0].normal.len(),
        }
    }

    /// Negative inside, zero on the boundary, positive outside. Inside the
    /// domain this is minus the distance to the boundary.
    pub fn signed_gap(&self, x: &[f64]) -> f64 {
        match self {
            ConvexDomain::Box { min, max } => {
                let mut g = f64::NEG_INFINITY;
                for i in 0..min.len() {
                    g = g.max(min[i] - x[i]).max(x[i] - max[i]);
                }
                g
            }
            ConvexDomain::Ball { center, radius } => {
                let r2: f64 = center.iter().zip(x).map(|(c, y)| (y - c) * (y - c)).sum();
                r2.sqrt() - radius
            }
            ConvexDomain::Polytope { faces, .. } => {
                faces.iter().map(|f| f.value(x)).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    #[inline]
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        self.signed_gap(x) <= slack
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ConvexDomain::Box { min, max } => (min.clone(), max.clone()),
            ConvexDomain::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            ConvexDomain::Polytope { vertices, .. } => {
                let n = vertices[0].len();
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for v in vertices {
                    for i in 0..n {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Supremum of pairwise distances.
    pub fn diameter(&self) -> f64 {
        match self {
            ConvexDomain::Box { min, max } => {
                min.iter().zip(max).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
            }
            ConvexDomain::Ball { radius, .. } => 2.0 * radius,
            ConvexDomain::Polytope { vertices, .. } => {
                let mut d = 0.0f64;
                for (i, a) in vertices.iter().enumerate() {
                    for b in &vertices[i + 1..] {
                        d = d.max(distance(a, b));
                    }
                }
                d
            }
        }
    }

    /// Facets as half-spaces (a box contributes its `2n` faces).
    pub fn facets(&self) -> Option<Vec<HalfSpace>> {
        match self {
            ConvexDomain::Box { min, max } => {
                let n = min.len();
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..n {
                    out.push(HalfSpace { normal: unit(n, i, -1.0), offset: -min[i] });
                    out.push(HalfSpace { normal: unit(n, i, 1.0), offset: max[i] });
                }
                Some(out)
            }
            ConvexDomain::Ball { .. } => None,
            ConvexDomain::Polytope { faces, .. } => Some(faces.clone()),
        }
    }

    /// Supporting hyperplane at a boundary point `p`, oriented so that the
    /// domain lies on its nonnegative side.
    pub fn supporting_hyperplane(&self, p: &[f64]) -> Result<Hyperplane> {
        let gap = self.signed_gap(p);
        if gap.abs() > BOUNDARY_TOL {
            return Err(Error::NotOnBoundary(gap));
        }
        match self {
            ConvexDomain::Ball { center, radius } => {
                let normal: Vec<f64> = center.iter().zip(p).map(|(c, x)| (c - x) / radius).collect();
                let nn = linalg::norm(&normal);
                let normal: Vec<f64> = normal.iter().map(|v| v / nn).collect();
                let offset = dot(&normal, p);
                Ok(Hyperplane { normal, offset })
            }
            _ => {
                // first facet active at p
                let facets = self.facets().expect("box or polytope");
                let face = facets
                    .iter()
                    .find(|f| f.value(p).abs() <= BOUNDARY_TOL)
                    .ok_or(Error::NotOnBoundary(gap))?;
                let normal: Vec<f64> = face.normal.iter().map(|v| -v).collect();
                let offset = dot(&normal, p);
                Ok(Hyperplane { normal, offset })
            }
        }
    }

    /// A point of the boundary near `x` (used to place boundary samples).
    pub fn project_to_boundary(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConvexDomain::Box { min, max } => {
                let mut best = (f64::INFINITY, 0, 0.0);
                for i in 0..min.len() {
                    let lo = (x[i] - min[i]).abs();
                    let hi = (max[i] - x[i]).abs();
                    if lo < best.0 {
                        best = (lo, i, min[i]);
                    }
                    if hi < best.0 {
                        best = (hi, i, max[i]);
                    }
                }
                let mut y: Vec<f64> = x.iter().zip(min.iter().zip(max)).map(|(v, (a, b))| v.clamp(*a, *b)).collect();
                y[best.1] = best.2;
                y
            }
            ConvexDomain::Ball { center, radius } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let r = linalg::norm(&d);
                if r == 0.0 {
                    let mut y = center.clone();
                    y[0] += radius;
                    return y;
                }
                center.iter().zip(&d).map(|(c, v)| c + v * radius / r).collect()
            }
            ConvexDomain::Polytope { faces, .. } => {
                // nearest facet plane, then repair any violated constraints
                let mut y = x.to_vec();
                let nearest = faces
                    .iter()
                    .max_by(|a, b| a.value(x).total_cmp(&b.value(x)))
                    .expect("nonempty");
                let v = nearest.value(&y);
                for (yi, ni) in y.iter_mut().zip(&nearest.normal) {
                    *yi -= v * ni;
                }
                for _ in 0..50 {
                    let worst = faces
                        .iter()
                        .max_by(|a, b| a.value(&y).total_cmp(&b.value(&y)))
                        .expect("nonempty");
                    let v = worst.value(&y);
                    if v <= CLASSIFY_SLACK {
                        break;
                    }
                    for (yi, ni) in y.iter_mut().zip(&worst.normal) {
                        *yi -= v * ni;
                    }
                }
                y
            }
        }
    }

    /// Boundary points at which barrier functions are probed: `per_face`
    /// points on every facet of a box or polytope, 16 points on a sphere.
    pub fn boundary_probes(&self, per_face: usize) -> Vec<Vec<f64>> {
        match self {
            ConvexDomain::Ball { center, radius } => {
                let n = center.len();
                sphere_directions(n, 16)
                    .into_iter()
                    .map(|d| center.iter().zip(&d).map(|(c, v)| c + radius * v).collect())
                    .collect()
            }
            ConvexDomain::Box { min, max } => {
                let n = min.len();
                let mut out = Vec::new();
                for i in 0..n {
                    let along = (i + 1) % n;
                    for &side in &[min[i], max[i]] {
                        for k in 0..per_face {
                            let mut p: Vec<f64> = min.iter().zip(max).map(|(a, b)| 0.5 * (a + b)).collect();
                            p[i] = side;
                            let frac = (k as f64 + 0.5) / per_face as f64;
                            p[along] = min[along] + frac * (max[along] - min[along]);
                            out.push(p);
                        }
                    }
                }
                out
            }
            ConvexDomain::Polytope { faces, vertices } => {
                let mut out = Vec::new();
                for f in faces {
                    let on: Vec<&Vec<f64>> = vertices.iter().filter(|v| f.value(v).abs() <= BOUNDARY_TOL).collect();
                    if on.is_empty() {
                        continue;
                    }
                    let n = on[0].len();
                    let mut c = vec![0.0; n];
                    for v in &on {
                        for (ci, vi) in c.iter_mut().zip(v.iter()) {
                            *ci += vi / on.len() as f64;
                        }
                    }
                    for k in 0..per_face {
                        let v = on[k % on.len()];
                        let t = (k + 1) as f64 / (per_face + 1) as f64;
                        out.push(c.iter().zip(v).map(|(a, b)| a + t * (b - a)).collect());
                    }
                }
                out
            }
        }
    }

    /// The domain with coordinates permuted: axis `k` of the result is axis
    /// `perm[k]` of `self`.
    pub fn permute_axes(&self, perm: &[usize]) -> Self {
        let p = |v: &[f64]| perm.iter().map(|&k| v[k]).collect::<Vec<f64>>();
        match self {
            ConvexDomain::Box { min, max } => ConvexDomain::Box { min: p(min), max: p(max) },
            ConvexDomain::Ball { center, radius } => ConvexDomain::Ball { center: p(center), radius: *radius },
            ConvexDomain::Polytope { faces, vertices } => ConvexDomain::Polytope {
                faces: faces.iter().map(|f| HalfSpace { normal: p(&f.normal), offset: f.offset }).collect(),
                vertices: vertices.iter().map(|v| p(v)).collect(),
            },
        }
    }
}

fn unit(n: usize, i: usize, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = s;
    v
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Visits every `k`-subset of `0..len` in lexicographic order.
fn for_each_subset(len: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > len {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == len - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// True when some nonzero `d` satisfies `⟨a_f, d⟩ <= 0` for every facet.
fn has_recession_direction(faces: &[HalfSpace], n: usize) -> bool {
    // rank deficiency gives a whole line of recession directions
    let mut a = Vec::with_capacity(faces.len() * n);
    for f in faces {
        a.extend_from_slice(&f.normal);
    }
    if matrix_rank(&a, faces.len(), n) < n {
        return true;
    }
    // pointed cone: any nontrivial cone has an extreme ray cut out by n-1 facets
    let mut found = false;
    for_each_subset(faces.len(), n - 1, |sub| {
        if found {
            return;
        }
        let rows: Vec<&[f64]> = sub.iter().map(|&k| faces[k].normal.as_slice()).collect();
        let d = if n == 1 { vec![1.0] } else { linalg::null_vector(&rows, n) };
        let dn = linalg::norm(&d);
        if dn < 1e-12 {
            return;
        }
        for s in [1.0, -1.0] {
            if faces.iter().all(|f| s * dot(&f.normal, &d) / dn <= 1e-12) {
                found = true;
            }
        }
    });
    found
}

fn matrix_rank(a: &[f64], rows: usize, cols: usize) -> usize {
    let mut w = a.to_vec();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let pivot = (rank..rows)
            .max_by(|&r, &s| w[r * cols + col].abs().total_cmp(&w[s * cols + col].abs()))
            .unwrap();
        if w[pivot * cols + col].abs() < 1e-12 {
            continue;
        }
        for k in 0..cols {
            w.swap(pivot * cols + k, rank * cols + k);
        }
        for r in (rank + 1)..rows {
            let factor = w[r * cols + col] / w[rank * cols + col];
            for k in col..cols {
                w[r * cols + k] -= factor * w[rank * cols + k];
            }
        }
        rank += 1;
    }
    rank
}

/// Vertices of `{x : ⟨a_f, x⟩ <= b_f}` by solving every `n × n` facet system.
fn enumerate_vertices(faces: &[HalfSpace], n: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for_each_subset(faces.len(), n, |sub| {
        for (r, &k) in sub.iter().enumerate() {
            a[r * n..(r + 1) * n].copy_from_slice(&faces[k].normal);
            b[r] = faces[k].offset;
        }
        if let Some(x) = linalg::solve(&a, &b, n) {
            let feasible = faces.iter().all(|f| f.value(&x) <= BOUNDARY_TOL);
            if feasible && !out.iter().any(|v| distance(v, &x) <= BOUNDARY_TOL) {
                out.push(x);
            }
        }
    });
    out
}

/// Deterministic, roughly uniform directions on the unit sphere.
pub(crate) fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        return (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..n {
        for s in [1.0, -1.0] {
            if out.len() < count {
                out.push(unit(n, i, s));
            }
        }
    }
    // remaining points: sign patterns of the cube diagonals
    let mut code: u64 = 0;
    while out.len() < count {
        let v: Vec<f64> = (0..n)
            .map(|i| if (code >> (i % 64)) & 1 == 1 { -1.0 } else { 1.0 })
            .collect();
        let norm = (n as f64).sqrt();
        out.push(v.iter().map(|x| x / norm).collect());
        code += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

/// Uniform lattice `origin + index * h` with node classification.
///
/// A node is `Interior` when it lies strictly inside the domain and every
/// node of its second order stencil (axis neighbors `±h e_i` and diagonal
/// neighbors `±h e_i ± h e_j`) lies in the closed domain. Stencil members
/// that are not themselves interior are `Boundary` nodes; they carry the
/// Dirichlet data. All other lattice nodes are `Exterior`.
#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    h: f64,
    origin: Vec<f64>,
    extents: Vec<usize>,
    strides: Vec<usize>,
    class: Vec<NodeClass>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    slot: Vec<usize>,
    neighbors: Vec<usize>,
}

pub const NO_SLOT: usize = usize::MAX;

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn node_count(&self) -> usize {
        self.class.len()
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.class
    }

    /// Interior nodes in lexicographic order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Boundary nodes in lexicographic order.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Position of `node` in [`Grid::interior`], or [`NO_SLOT`].
    pub fn interior_slot(&self, node: usize) -> usize {
        self.slot[node]
    }

    /// Stencil size per interior node: `2n` axis neighbors and `4·C(n,2)` diagonals.
    pub fn stencil_len(&self) -> usize {
        2 * self.dim * self.dim
    }

    /// Neighbor table of the interior node at `slot`. Entry `2i` is `-h e_i`,
    /// `2i + 1` is `+h e_i`; then for every pair `i < j` four entries
    /// ordered `(-,-), (-,+), (+,-), (+,+)`.
    pub fn stencil(&self, slot: usize) -> &[usize] {
        let s = self.stencil_len();
        &self.neighbors[slot * s..(slot + 1) * s]
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rem = node;
        self.strides
            .iter()
            .map(|&s| {
                let q = rem / s;
                rem %= s;
                q
            })
            .collect()
    }

    pub fn node_at(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.dim || index.iter().zip(&self.extents).any(|(i, e)| i >= e) {
            return None;
        }
        Some(index.iter().zip(&self.strides).map(|(i, s)| i * s).sum())
    }

    pub fn position(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.position_into(node, &mut x);
        x
    }

    pub fn position_into(&self, node: usize, x: &mut [f64]) {
        let mut rem = node;
        for k in 0..self.dim {
            let q = rem / self.strides[k];
            rem %= self.strides[k];
            x[k] = self.origin[k] + q as f64 * self.h;
        }
    }

    /// Index of the pair `(i, j)`, `i < j`, among all axis pairs.
    #[inline]
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.dim);
        i * (2 * self.dim - i - 1) / 2 + (j - i - 1)
    }
}

/// Builds the classified lattice of spacing `h` over `domain`.
pub fn build_grid(domain: &ConvexDomain, h: f64) -> Result<Grid> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid spacing must be positive, got {h}")));
    }
    let n = domain.dim();
    let (lo, hi) = domain.bounding_box();
    let origin: Vec<f64> = match domain {
        ConvexDomain::Ball { center, radius } => {
            let k = (radius / h + 1e-9).floor();
            center.iter().map(|c| c - k * h).collect()
        }
        _ => lo.clone(),
    };
    let extents: Vec<usize> = (0..n)
        .map(|i| ((hi[i] - origin[i]) / h + 1e-9).floor() as usize + 1)
        .collect();
    let total = extents.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
    let total = match total {
        Some(t) if t <= 200_000_000 => t,
        _ => return Err(Error::InvalidParameter("grid is too large".into())),
    };
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * extents[k + 1];
    }

    let mut grid = Grid {
        dim: n,
        h,
        origin,
        extents,
        strides,
        class: vec![NodeClass::Exterior; total],
        interior: Vec::new(),
        boundary: Vec::new(),
        slot: vec![NO_SLOT; total],
        neighbors: Vec::new(),
    };

    let mut inside = vec![false; total];
    let mut strict = vec![false; total];
    let mut x = vec![0.0; n];
    for node in 0..total {
        grid.position_into(node, &mut x);
        let gap = domain.signed_gap(&x);
        inside[node] = gap <= CLASSIFY_SLACK;
        strict[node] = gap < -CLASSIFY_SLACK;
    }

    let s = grid.stencil_len();
    let mut offsets: Vec<Vec<isize>> = Vec::with_capacity(s);
    for i in 0..n {
        for sign in [-1isize, 1] {
            let mut o = vec![0isize; n];
            o[i] = sign;
            offsets.push(o);
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for (si, sj) in [(-1isize, -1isize), (-1, 1), (1, -1), (1, 1)] {
                let mut o = vec![0isize; n];
                o[i] = si;
                o[j] = sj;
                offsets.push(o);
            }
        }
    }

    let mut stencil = vec![0usize; s];
    for node in 0..total {
        if !strict[node] {
            continue;
        }
        let idx = grid.multi_index(node);
        let mut complete = true;
        for (k, o) in offsets.iter().enumerate() {
            let mut nb = 0usize;
            let mut ok = true;
            for d in 0..n {
                let v = idx[d] as isize + o[d];
                if v < 0 || v as usize >= grid.extents[d] {
                    ok = false;
                    break;
                }
                nb += v as usize * grid.strides[d];
            }
            if !ok || !inside[nb] {
                complete = false;
                break;
            }
            stencil[k] = nb;
        }
        if complete {
            grid.class[node] = NodeClass::Interior;
            grid.slot[node] = grid.interior.len();
            grid.interior.push(node);
            grid.neighbors.extend_from_slice(&stencil);
        }
    }
    if grid.interior.is_empty() {
        return Err(Error::DegenerateGrid);
    }
    for k in 0..grid.interior.len() {
        for t in 0..s {
            let nb = grid.neighbors[k * s + t];
            if grid.class[nb] == NodeClass::Exterior {
                grid.class[nb] = NodeClass::Boundary;
            }
        }
    }
    grid.boundary = (0..total).filter(|&k| grid.class[k] == NodeClass::Boundary).collect();
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> ConvexDomain {
        ConvexDomain::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    fn triangle() -> ConvexDomain {
        let s = 0.5f64.sqrt();
        ConvexDomain::new_polytope(vec![
            HalfSpace { normal: vec![-1.0, 0.0], offset: 0.0 },
            HalfSpace { normal: vec![0.0, -1.0], offset: 0.0 },
            HalfSpace { normal: vec![s, s], offset: s },
        ])
        .unwrap()
    }

    fn count(grid: &Grid, c: NodeClass) -> usize {
        grid.classes().iter().filter(|&&k| k == c).count()
    }

    #[test]
    fn coarse_square_has_one_interior_node() {
        let g = build_grid(&unit_square(), 0.5).unwrap();
        assert_eq!(g.extents(), &[3, 3]);
        assert_eq!(count(&g, NodeClass::Interior), 1);
        assert_eq!(count(&g, NodeClass::Boundary), 8);
    }

    #[test]
    fn quarter_spacing_square() {
        let g = build_grid(&unit_square(), 0.25).unwrap();
        assert_eq!(g.extents(), &[5, 5]);
        assert_eq!(count(&g, NodeClass::Interior), 9);
        assert_eq!(count(&g, NodeClass::Boundary), 16);
    }

    #[test]
    fn ball_interior_count_matches_enumeration() {
        let ball = ConvexDomain::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let h = 0.1;
        let g = build_grid(&ball, h).unwrap();
        // independent enumeration over integer lattice points
        let inside = |i: i64, j: i64| {
            let (x, y) = (i as f64 * h, j as f64 * h);
            (x * x + y * y).sqrt() - 1.0 <= 1e-12
        };
        let mut expect = 0;
        for i in -12i64..=12 {
            for j in -12i64..=12 {
                let (x, y) = (i as f64 * h, j as f64 * h);
                if (x * x + y * y).sqrt() - 1.0 >= -1e-12 {
                    continue;
                }
                let all = (-1..=1).all(|a| (-1..=1).all(|b| inside(i + a, j + b)));
                if all {
                    expect += 1;
                }
            }
        }
        assert_eq!(count(&g, NodeClass::Interior), expect);
        assert!(expect > 200);
    }

    #[test]
    fn too_coarse_grid_is_degenerate() {
        assert_eq!(build_grid(&unit_square(), 0.75).unwrap_err(), Error::DegenerateGrid);
        assert!(build_grid(&unit_square(), 0.0).is_err());
    }

    #[test]
    fn stencil_members_are_never_exterior() {
        let ball = ConvexDomain::new_ball(vec![0.1, -0.2, 0.0], 0.7).unwrap();
        let g = build_grid(&ball, 0.1).unwrap();
        assert_eq!(g.stencil_len(), 18);
        for slot in 0..g.interior().len() {
            for &nb in g.stencil(slot) {
                assert_ne!(g.class(nb), NodeClass::Exterior);
            }
        }
        let h = g.spacing();
        for &b in g.boundary() {
            let gap = ball.signed_gap(&g.position(b));
            assert!(gap <= 1e-12 && gap >= -(2f64.sqrt()) * h - 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn diameters() {
        assert!((unit_square().diameter() - 2f64.sqrt()).abs() < 1e-15);
        let ball = ConvexDomain::new_ball(vec![3.0, 1.0], 0.5).unwrap();
        assert_eq!(ball.diameter(), 1.0);
        // brute force over the known vertices
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mut want = 0.0f64;
        for a in &verts {
            for b in &verts {
                want = want.max(f64::hypot(a[0] - b[0], a[1] - b[1]));
            }
        }
        assert!((triangle().diameter() - want).abs() < 1e-12);
    }

    #[test]
    fn box_diameter_equals_corner_enumeration() {
        let d = ConvexDomain::new_box(vec![-1.0, 0.5, 2.0], vec![0.5, 1.0, 4.0]).unwrap();
        let (lo, hi) = d.bounding_box();
        let mut best = 0.0f64;
        for a in 0..8u32 {
            for b in 0..8u32 {
                let pick = |c: u32, k: usize| if (c >> k) & 1 == 1 { hi[k] } else { lo[k] };
                let dist: f64 = (0..3).map(|k| (pick(a, k) - pick(b, k)).powi(2)).sum::<f64>().sqrt();
                best = best.max(dist);
            }
        }
        assert_eq!(d.diameter(), best);
    }

    #[test]
    fn unbounded_polytope_is_rejected() {
        let wedge = vec![
            HalfSpace { normal: vec![-1.0, 0.0], offset: 0.0 },
            HalfSpace { normal: vec![0.0, -1.0], offset: 0.0 },
        ];
        assert_eq!(ConvexDomain::new_polytope(wedge).unwrap_err(), Error::UnboundedDomain);
        let slab = vec![
            HalfSpace { normal: vec![-1.0, 0.0], offset: 0.0 },
            HalfSpace { normal: vec![1.0, 0.0], offset: 1.0 },
        ];
        assert_eq!(ConvexDomain::new_polytope(slab).unwrap_err(), Error::UnboundedDomain);
        let s = 0.5f64.sqrt();
        let cone = vec![
            HalfSpace { normal: vec![-s, s], offset: 0.0 },
            HalfSpace { normal: vec![-s, -s], offset: 0.0 },
            HalfSpace { normal: vec![-1.0, 0.0], offset: 5.0 },
        ];
        assert_eq!(ConvexDomain::new_polytope(cone).unwrap_err(), Error::UnboundedDomain);
    }

    #[test]
    fn non_unit_normal_is_rejected() {
        let faces = vec![HalfSpace { normal: vec![2.0, 0.0], offset: 1.0 }];
        assert!(matches!(ConvexDomain::new_polytope(faces), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn supporting_hyperplanes() {
        let sq = unit_square();
        let hp = sq.supporting_hyperplane(&[0.0, 0.5]).unwrap();
        assert_eq!(hp.normal, vec![1.0, 0.0]);
        assert_eq!(hp.distance(&[0.3, 0.9]), 0.3);

        let ball = ConvexDomain::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let hp = ball.supporting_hyperplane(&[1.0, 0.0]).unwrap();
        assert!((hp.normal[0] + 1.0).abs() < 1e-15 && hp.normal[1].abs() < 1e-15);

        assert!(matches!(sq.supporting_hyperplane(&[0.5, 0.5]), Err(Error::NotOnBoundary(_))));
    }

    #[test]
    fn polytope_face_plane_supports_sampled_interior() {
        use rand::{Rng, SeedableRng};
        let tri = triangle();
        let p = [0.5, 0.5];
        let hp = tri.supporting_hyperplane(&p).unwrap();
        assert!(hp.distance(&p).abs() < 1e-12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut min_d = f64::INFINITY;
        let mut sampled = 0;
        while sampled < 10_000 {
            let y = [rng.random::<f64>(), rng.random::<f64>()];
            if tri.contains(&y, 0.0) {
                min_d = min_d.min(hp.distance(&y));
                sampled += 1;
            }
        }
        assert!(min_d >= 0.0);
    }

    #[test]
    fn probes_lie_on_boundary() {
        for d in [unit_square(), triangle(), ConvexDomain::new_ball(vec![0.0, 0.0, 0.0], 2.0).unwrap()] {
            let probes = d.boundary_probes(8);
            assert!(!probes.is_empty());
            for p in probes {
                assert!(d.signed_gap(&p).abs() < 1e-12, "{p:?}");
                assert!(d.supporting_hyperplane(&p).is_ok());
            }
        }
    }

    #[test]
    fn projection_lands_on_boundary() {
        for d in [unit_square(), triangle(), ConvexDomain::new_ball(vec![0.0, 0.0], 1.0).unwrap()] {
            for x in [[0.1, 0.2], [0.3, 0.35], [0.05, 0.9]] {
                if !d.contains(&x, 0.0) {
                    continue;
                }
                let y = d.project_to_boundary(&x);
                assert!(d.signed_gap(&y).abs() < 1e-9, "{y:?}");
            }
        }
    }

    #[test]
    fn classification_commutes_with_axis_permutation() {
        let d = ConvexDomain::new_box(vec![0.0, -0.5, 0.25], vec![1.0, 0.25, 1.0]).unwrap();
        let perm = [2, 0, 1];
        let dp = d.permute_axes(&perm);
        let g = build_grid(&d, 0.125).unwrap();
        let gp = build_grid(&dp, 0.125).unwrap();
        for node in 0..gp.node_count() {
            let ip = gp.multi_index(node);
            let mut orig = vec![0usize; 3];
            for (k, &src) in perm.iter().enumerate() {
                orig[src] = ip[k];
            }
            let on = g.node_at(&orig).unwrap();
            assert_eq!(gp.class(node), g.class(on));
        }
    }
}
