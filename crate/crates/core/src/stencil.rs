//! Grid functions and their second order finite differences.
//!
//! All discrete differentiation in the crate goes through this module.
//! Gradients use centered differences, Hessians the 3-point formula on the
//! diagonal and the 4-point cross formula off it. Both are exact on
//! polynomials of total degree two.

use std::sync::Arc;

use crate::fields::SmoothMap;
use crate::lattice::{Grid, NodeClass, NO_SLOT};
use crate::{Error, Result};

/// A sampled map `f: Ω -> R^m`; one `m`-vector per lattice node. Exterior
/// nodes carry zeros and are never read.
#[derive(Debug, Clone)]
pub struct GraphMap {
    grid: Arc<Grid>,
    m: usize,
    values: Vec<f64>,
}

impl GraphMap {
    pub fn zeros(grid: Arc<Grid>, m: usize) -> Self {
        let len = grid.node_count() * m;
        GraphMap { grid, m, values: vec![0.0; len] }
    }

    /// Samples `map` at every non-exterior node.
    pub fn sample(grid: Arc<Grid>, map: &dyn SmoothMap) -> Self {
        let m = map.codim();
        let mut out = GraphMap::zeros(grid, m);
        let mut x = vec![0.0; out.grid.dim()];
        for node in 0..out.grid.node_count() {
            if out.grid.class(node) == NodeClass::Exterior {
                continue;
            }
            out.grid.position_into(node, &mut x);
            map.value(&x, &mut out.values[node * m..(node + 1) * m]);
        }
        out
    }

    pub fn from_values(grid: Arc<Grid>, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() * m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                grid.node_count() * m,
                values.len()
            )));
        }
        Ok(GraphMap { grid, m, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn codim(&self) -> usize {
        self.m
    }

    pub fn value(&self, node: usize) -> &[f64] {
        &self.values[node * self.m..(node + 1) * self.m]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `a·self + b·other` on the same grid.
    pub fn combine(&self, a: f64, other: &GraphMap, b: f64) -> GraphMap {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        GraphMap { grid: self.grid.clone(), m: self.m, values }
    }

    /// Largest node-wise Euclidean distance over non-exterior nodes.
    pub fn sup_distance(&self, other: &GraphMap) -> f64 {
        let m = self.m;
        (0..self.grid.node_count())
            .filter(|&k| self.grid.class(k) != NodeClass::Exterior)
            .map(|k| {
                let a = &self.values[k * m..(k + 1) * m];
                let b = &other.values[k * m..(k + 1) * m];
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `n × m` matrix `J[i][β] = ∂f^β/∂x^i`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub n: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl Jacobian {
    pub fn zeros(n: usize, m: usize) -> Self {
        Jacobian { n, m, data: vec![0.0; n * m] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map(|r| r.len()).unwrap_or(0);
        Jacobian { n, m, data: rows.concat() }
    }

    #[inline]
    pub fn get(&self, i: usize, beta: usize) -> f64 {
        self.data[i * self.m + beta]
    }
}

/// `m` symmetric `n × n` blocks; block `β`, entry `(i, j)` is `∂²f^β/∂x^i∂x^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianStack {
    pub n: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl HessianStack {
    #[inline]
    pub fn get(&self, beta: usize, i: usize, j: usize) -> f64 {
        self.data[beta * self.n * self.n + i * self.n + j]
    }

    pub fn block(&self, beta: usize) -> &[f64] {
        let nn = self.n * self.n;
        &self.data[beta * nn..(beta + 1) * nn]
    }
}

fn interior_slot(grid: &Grid, node: usize) -> Result<usize> {
    if node >= grid.node_count() {
        return Err(Error::ExteriorNode(node));
    }
    match grid.class(node) {
        NodeClass::Exterior => Err(Error::ExteriorNode(node)),
        NodeClass::Boundary => Err(Error::InsufficientStencil(node)),
        NodeClass::Interior => {
            let slot = grid.interior_slot(node);
            debug_assert_ne!(slot, NO_SLOT);
            Ok(slot)
        }
    }
}

/// Centered-difference Jacobian at the interior node `slot`, into `out` (`n × m`).
#[inline]
pub(crate) fn gradient_into(grid: &Grid, values: &[f64], m: usize, slot: usize, out: &mut [f64]) {
    let n = grid.dim();
    let inv2h = 0.5 / grid.spacing();
    let st = grid.stencil(slot);
    for i in 0..n {
        let lo = st[2 * i] * m;
        let hi = st[2 * i + 1] * m;
        for b in 0..m {
            out[i * m + b] = (values[hi + b] - values[lo + b]) * inv2h;
        }
    }
}

/// Hessian stack at the interior node `slot`, into `out` (`m × n × n`).
#[inline]
pub(crate) fn hessian_into(grid: &Grid, values: &[f64], m: usize, slot: usize, out: &mut [f64]) {
    let n = grid.dim();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let inv_4h2 = 0.25 * inv_h2;
    let st = grid.stencil(slot);
    let c = grid.interior()[slot] * m;
    let nn = n * n;
    for i in 0..n {
        let lo = st[2 * i] * m;
        let hi = st[2 * i + 1] * m;
        for b in 0..m {
            out[b * nn + i * n + i] = (values[hi + b] - 2.0 * values[c + b] + values[lo + b]) * inv_h2;
        }
    }
    let mut base = 2 * n;
    for i in 0..n {
        for j in (i + 1)..n {
            let mm = st[base] * m;
            let mp = st[base + 1] * m;
            let pm = st[base + 2] * m;
            let pp = st[base + 3] * m;
            for b in 0..m {
                let d = (values[pp + b] - values[pm + b] - values[mp + b] + values[mm + b]) * inv_4h2;
                out[b * nn + i * n + j] = d;
                out[b * nn + j * n + i] = d;
            }
            base += 4;
        }
    }
}

pub fn gradient_at(f: &GraphMap, node: usize) -> Result<Jacobian> {
    let slot = interior_slot(&f.grid, node)?;
    let mut j = Jacobian::zeros(f.grid.dim(), f.m);
    gradient_into(&f.grid, &f.values, f.m, slot, &mut j.data);
    Ok(j)
}

pub fn hessian_at(f: &GraphMap, node: usize) -> Result<HessianStack> {
    let slot = interior_slot(&f.grid, node)?;
    let n = f.grid.dim();
    let mut data = vec![0.0; f.m * n * n];
    hessian_into(&f.grid, &f.values, f.m, slot, &mut data);
    Ok(HessianStack { n, m: f.m, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Affine, Monomial, Polynomial};
    use crate::lattice::{build_grid, ConvexDomain};
    use proptest::prelude::*;

    fn square_grid(h: f64) -> Arc<Grid> {
        let d = ConvexDomain::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        Arc::new(build_grid(&d, h).unwrap())
    }

    fn node_near(grid: &Grid, x: &[f64]) -> usize {
        let idx: Vec<usize> = x
            .iter()
            .zip(grid.origin())
            .map(|(v, o)| ((v - o) / grid.spacing()).round() as usize)
            .collect();
        grid.node_at(&idx).unwrap()
    }

    #[derive(Debug)]
    struct Func(fn(&[f64]) -> f64);
    impl SmoothMap for Func {
        fn dim(&self) -> usize {
            2
        }
        fn codim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64], out: &mut [f64]) {
            out[0] = (self.0)(x);
        }
        fn jacobian(&self, _: &[f64], _: &mut [f64]) {
            unimplemented!()
        }
        fn hessian(&self, _: &[f64], _: &mut [f64]) {
            unimplemented!()
        }
    }

    #[test]
    fn affine_gradient_is_transpose() {
        let g = square_grid(0.125);
        let a = Affine::new(vec![vec![0.3, -0.2], vec![0.1, 0.5], vec![0.0, 0.7]], vec![1.0, 0.0, -1.0]);
        let f = GraphMap::sample(g.clone(), &a);
        for &node in g.interior() {
            let j = gradient_at(&f, node).unwrap();
            for i in 0..2 {
                for b in 0..3 {
                    assert!((j.get(i, b) - a.matrix[b * 2 + i]).abs() < 1e-14);
                }
            }
            let hs = hessian_at(&f, node).unwrap();
            assert!(hs.data.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn product_xy_gradient_exact() {
        let g = square_grid(0.25);
        let f = GraphMap::sample(g.clone(), &Func(|x| x[0] * x[1]));
        let node = node_near(&g, &[0.5, 0.5]);
        let j = gradient_at(&f, node).unwrap();
        assert_eq!(j.data, vec![0.5, 0.5]);
    }

    #[test]
    fn sine_gradient_is_second_order() {
        let err = |h: f64| {
            let g = square_grid(h);
            let f = GraphMap::sample(g.clone(), &Func(|x| x[0].sin()));
            let node = node_near(&g, &[0.5, 0.5]);
            (gradient_at(&f, node).unwrap().get(0, 0) - 0.5f64.cos()).abs()
        };
        let ratio = err(1.0 / 16.0) / err(1.0 / 32.0);
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn exponential_hessian_is_second_order() {
        let err = |h: f64| {
            let g = square_grid(h);
            let f = GraphMap::sample(g.clone(), &Func(|x| (x[0] + 2.0 * x[1]).exp()));
            let node = node_near(&g, &[0.5, 0.25]);
            let hs = hessian_at(&f, node).unwrap();
            let e = 1.0f64.exp();
            let want = [e, 2.0 * e, 2.0 * e, 4.0 * e];
            (0..4).map(|k| (hs.data[k] - want[k]).abs()).fold(0.0, f64::max)
        };
        let ratio = err(1.0 / 16.0) / err(1.0 / 32.0);
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn non_interior_nodes_are_rejected() {
        let g = square_grid(0.25);
        let f = GraphMap::zeros(g.clone(), 1);
        assert_eq!(gradient_at(&f, 0).unwrap_err(), Error::InsufficientStencil(0));
        assert_eq!(hessian_at(&f, 10_000).unwrap_err(), Error::ExteriorNode(10_000));
    }

    fn quadratic(coeffs: &[f64], n: usize) -> Polynomial {
        // one component: full quadratic with linear and constant terms
        let mut terms = Vec::new();
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let mut e = vec![0u32; n];
                e[i] += 1;
                e[j] += 1;
                terms.push(Monomial { exponents: e, coefficient: coeffs[k] });
                k += 1;
            }
        }
        for i in 0..n {
            let mut e = vec![0u32; n];
            e[i] = 1;
            terms.push(Monomial { exponents: e, coefficient: coeffs[k] });
            k += 1;
        }
        terms.push(Monomial { exponents: vec![0; n], coefficient: coeffs[k] });
        Polynomial { n, components: vec![terms] }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exact_on_random_quadratics(coeffs in proptest::collection::vec(-1.0f64..1.0, 10)) {
            let n = 3;
            let d = ConvexDomain::new_box(vec![-0.5; 3], vec![0.5; 3]).unwrap();
            let g = Arc::new(build_grid(&d, 0.25).unwrap());
            let p = quadratic(&coeffs, n);
            let f = GraphMap::sample(g.clone(), &p);
            let mut x = vec![0.0; n];
            for &node in g.interior() {
                g.position_into(node, &mut x);
                let j = gradient_at(&f, node).unwrap();
                let hs = hessian_at(&f, node).unwrap();
                let jt = crate::fields::SmoothMapExt::jacobian_vec(&p, &x);
                let ht = crate::fields::SmoothMapExt::hessian_vec(&p, &x);
                for (a, b) in j.data.iter().zip(&jt) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
                for (a, b) in hs.data.iter().zip(&ht) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn operators_are_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let g = square_grid(0.125);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let len = g.node_count() * 2;
            let u = GraphMap::from_values(g.clone(), 2, (0..len).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
            let v = GraphMap::from_values(g.clone(), 2, (0..len).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
            let w = u.combine(a, &v, b);
            for &node in g.interior() {
                let (ju, jv, jw) = (gradient_at(&u, node).unwrap(), gradient_at(&v, node).unwrap(), gradient_at(&w, node).unwrap());
                for k in 0..ju.data.len() {
                    prop_assert!((jw.data[k] - a * ju.data[k] - b * jv.data[k]).abs() < 1e-13 / 0.125);
                }
                let (hu, hv, hw) = (hessian_at(&u, node).unwrap(), hessian_at(&v, node).unwrap(), hessian_at(&w, node).unwrap());
                for k in 0..hu.data.len() {
                    prop_assert!((hw.data[k] - a * hu.data[k] - b * hv.data[k]).abs() < 1e-13 / (0.125 * 0.125));
                }
            }
        }
    }

    #[test]
    fn axis_permutation_equivariance() {
        // f(x, y, z) on a box vs f∘P on the permuted box
        let d = ConvexDomain::new_box(vec![0.0, 0.0, 0.0], vec![1.0, 0.5, 0.75]).unwrap();
        let perm = [1usize, 2, 0];
        let dp = d.permute_axes(&perm);
        let h = 0.125;
        let g = Arc::new(build_grid(&d, h).unwrap());
        let gp = Arc::new(build_grid(&dp, h).unwrap());
        let func = |x: &[f64]| (x[0] * 1.3 + x[1] * x[2]).sin() + x[1] * x[1] * x[0];
        let mut vals = vec![0.0; g.node_count()];
        for k in 0..g.node_count() {
            vals[k] = func(&g.position(k));
        }
        let mut valsp = vec![0.0; gp.node_count()];
        for k in 0..gp.node_count() {
            let y = gp.position(k);
            // y_k = x_{perm[k]}
            let mut x = vec![0.0; 3];
            for (k2, &src) in perm.iter().enumerate() {
                x[src] = y[k2];
            }
            valsp[k] = func(&x);
        }
        let f = GraphMap::from_values(g.clone(), 1, vals).unwrap();
        let fp = GraphMap::from_values(gp.clone(), 1, valsp).unwrap();
        for &node in gp.interior() {
            let ip = gp.multi_index(node);
            let mut orig = vec![0usize; 3];
            for (k, &src) in perm.iter().enumerate() {
                orig[src] = ip[k];
            }
            let on = g.node_at(&orig).unwrap();
            let jp = gradient_at(&fp, node).unwrap();
            let j = gradient_at(&f, on).unwrap();
            let hp = hessian_at(&fp, node).unwrap();
            let hs = hessian_at(&f, on).unwrap();
            for a in 0..3 {
                assert!((jp.get(a, 0) - j.get(perm[a], 0)).abs() < 1e-12);
                for b in 0..3 {
                    assert!((hp.get(0, a, b) - hs.get(0, perm[a], perm[b])).abs() < 1e-10);
                }
            }
        }
    }
}
