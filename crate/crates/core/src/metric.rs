//! Graph geometry in `R^n × R^m` with the metric `ds₁² − ds₂²`.
//!
//! For a Jacobian `J` (`n × m`) the induced metric is `g = I − J Jᵀ`. The
//! graph is spacelike exactly when all singular values of `J` are below one,
//! and the hyperbolic angle satisfies `cosh θ = 1/√det g = 1/√∏(1 − λᵢ²)`.

use crate::linalg;
use crate::stencil::{gradient_into, hessian_into, GraphMap, Jacobian};
use crate::lattice::{Grid, NodeClass};
use crate::{Error, Result, SPACELIKE_GUARD};

/// Singular values of a Jacobian, non-increasing, zero padded to length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum(pub Vec<f64>);

impl SingularSpectrum {
    pub fn largest(&self) -> f64 {
        self.0.first().copied().unwrap_or(0.0)
    }

    /// `∏(1 − λᵢ²)`, the determinant of the induced metric.
    pub fn metric_determinant(&self) -> f64 {
        self.0.iter().map(|l| 1.0 - l * l).product()
    }

    /// Largest `λᵢλⱼ` over `i ≠ j` (zero when `n < 2`).
    pub fn max_pair_product(&self) -> f64 {
        if self.0.len() < 2 {
            0.0
        } else {
            self.0[0] * self.0[1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InducedMetric {
    pub n: usize,
    pub g: Vec<f64>,
    pub g_inv: Vec<f64>,
    pub det_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicAngle {
    pub cosh_theta: f64,
}

/// Squared singular values of `j` (eigenvalues of `J Jᵀ`) into `sq`, sorted
/// non-increasingly; `gram` and `work` are `n × n` scratch.
#[inline]
fn squared_spectrum(j: &[f64], n: usize, m: usize, gram: &mut [f64], work: &mut [f64], sq: &mut [f64]) {
    linalg::gram(j, n, m, gram);
    work.copy_from_slice(gram);
    linalg::sym_eigenvalues_jacobi(work, n, sq);
    for v in sq.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    // insertion sort, descending
    for a in 1..n {
        let mut b = a;
        while b > 0 && sq[b - 1] < sq[b] {
            sq.swap(b - 1, b);
            b -= 1;
        }
    }
}

pub fn singular_values(j: &Jacobian) -> SingularSpectrum {
    let n = j.n;
    let mut gram = vec![0.0; n * n];
    let mut work = vec![0.0; n * n];
    let mut sq = vec![0.0; n];
    squared_spectrum(&j.data, n, j.m, &mut gram, &mut work, &mut sq);
    SingularSpectrum(sq.into_iter().map(f64::sqrt).collect())
}

pub fn induced_metric(j: &Jacobian) -> Result<InducedMetric> {
    let n = j.n;
    let spectrum = singular_values(j);
    let l1 = spectrum.largest();
    if !(l1 < 1.0 - SPACELIKE_GUARD) {
        return Err(Error::NotSpacelike { lambda1: l1, node: None });
    }
    let mut g = vec![0.0; n * n];
    linalg::gram(&j.data, n, j.m, &mut g);
    for (k, v) in g.iter_mut().enumerate() {
        *v = if k % (n + 1) == 0 { 1.0 - *v } else { -*v };
    }
    let mut g_inv = vec![0.0; n * n];
    let mut work = vec![0.0; n * n];
    let det_g = linalg::invert(&g, n, &mut g_inv, &mut work)
        .ok_or(Error::NotSpacelike { lambda1: l1, node: None })?;
    Ok(InducedMetric { n, g, g_inv, det_g })
}

pub fn hyperbolic_angle(spectrum: &SingularSpectrum) -> Result<HyperbolicAngle> {
    let l1 = spectrum.largest();
    if !(l1 < 1.0) {
        return Err(Error::NotSpacelike { lambda1: l1, node: None });
    }
    Ok(HyperbolicAngle { cosh_theta: 1.0 / spectrum.metric_determinant().sqrt() })
}

/// Per-worker scratch for [`evaluate_node`].
#[derive(Debug, Clone)]
pub(crate) struct NodeScratch {
    n: usize,
    m: usize,
    jac: Vec<f64>,
    hess: Vec<f64>,
    gram: Vec<f64>,
    work: Vec<f64>,
    g: Vec<f64>,
    g_inv: Vec<f64>,
    sq: Vec<f64>,
}

impl NodeScratch {
    pub(crate) fn new(n: usize, m: usize) -> Self {
        NodeScratch {
            n,
            m,
            jac: vec![0.0; n * m],
            hess: vec![0.0; m * n * n],
            gram: vec![0.0; n * n],
            work: vec![0.0; n * n],
            g: vec![0.0; n * n],
            g_inv: vec![0.0; n * n],
            sq: vec![0.0; n],
        }
    }
}

/// Geometry and flow velocity at one interior node.
///
/// Writes the singular values to `spectrum` and the tension
/// `g^{ij} ∂²f/∂x^i∂x^j` to `tension`, and returns `cosh θ`. On loss of
/// spacelikeness returns the offending largest singular value as the error.
#[inline]
pub(crate) fn evaluate_node(
    grid: &Grid,
    values: &[f64],
    slot: usize,
    s: &mut NodeScratch,
    spectrum: &mut [f64],
    tension: &mut [f64],
) -> std::result::Result<f64, f64> {
    let (n, m) = (s.n, s.m);
    gradient_into(grid, values, m, slot, &mut s.jac);
    squared_spectrum(&s.jac, n, m, &mut s.gram, &mut s.work, &mut s.sq);
    let mut det = 1.0;
    for k in 0..n {
        spectrum[k] = s.sq[k].sqrt();
        det *= 1.0 - s.sq[k];
    }
    let l1 = spectrum[0];
    if !(l1 < 1.0 - SPACELIKE_GUARD) {
        return Err(l1);
    }
    for k in 0..n * n {
        s.g[k] = if k % (n + 1) == 0 { 1.0 - s.gram[k] } else { -s.gram[k] };
    }
    if linalg::invert(&s.g, n, &mut s.g_inv, &mut s.work).is_none() {
        return Err(l1);
    }
    hessian_into(grid, values, m, slot, &mut s.hess);
    let nn = n * n;
    for b in 0..m {
        let hb = &s.hess[b * nn..(b + 1) * nn];
        tension[b] = s.g_inv.iter().zip(hb).map(|(a, h)| a * h).sum();
    }
    Ok(1.0 / det.sqrt())
}

fn interior_slot(f: &GraphMap, node: usize) -> Result<usize> {
    let grid = f.grid();
    if node >= grid.node_count() || grid.class(node) == NodeClass::Exterior {
        return Err(Error::ExteriorNode(node));
    }
    if grid.class(node) != NodeClass::Interior {
        return Err(Error::InsufficientStencil(node));
    }
    Ok(grid.interior_slot(node))
}

/// Tension vector `(g^{ij} ∂²f^α/∂x^i∂x^j)_α` at an interior node.
pub fn tension(f: &GraphMap, node: usize) -> Result<Vec<f64>> {
    interior_slot(f, node)?;
    let jac = crate::stencil::gradient_at(f, node)?;
    let metric = induced_metric(&jac).map_err(|e| match e {
        Error::NotSpacelike { lambda1, .. } => Error::NotSpacelike { lambda1, node: Some(node) },
        other => other,
    })?;
    let hess = crate::stencil::hessian_at(f, node)?;
    Ok((0..f.codim())
        .map(|b| metric.g_inv.iter().zip(hess.block(b)).map(|(a, h)| a * h).sum())
        .collect())
}

/// Largest tangential component `max_i |ḡ(∂ᵢF, Δ_g F)|` of the Laplace-Beltrami
/// operator applied to the position vector `F = (x, f)`, with `ḡ = diag(I, −I)`.
///
/// `Δ_g F` is evaluated in divergence form `(1/√G) ∂ᵢ(√G gⁱʲ ∂ⱼF)` by nested
/// centered differences, so every axis neighbor of `node` must be interior.
/// For smooth `f` the result is `O(h²)`.
pub fn laplace_beltrami_normality(f: &GraphMap, node: usize) -> Result<f64> {
    let slot = interior_slot(f, node)?;
    let grid = f.grid();
    let n = grid.dim();
    let m = f.codim();
    let h = grid.spacing();
    let stencil = grid.stencil(slot);
    for i in 0..n {
        for &nb in &stencil[2 * i..2 * i + 2] {
            if grid.class(nb) != NodeClass::Interior {
                return Err(Error::InsufficientStencil(node));
            }
        }
    }

    // √G gⁱʲ ∂ⱼF at a node, as an n × (n + m) block
    let flux = |at: usize| -> Result<Vec<f64>> {
        let jac = crate::stencil::gradient_at(f, at)?;
        let metric = induced_metric(&jac).map_err(|e| match e {
            Error::NotSpacelike { lambda1, .. } => Error::NotSpacelike { lambda1, node: Some(at) },
            other => other,
        })?;
        let sg = metric.det_g.sqrt();
        let w = n + m;
        let mut out = vec![0.0; n * w];
        for i in 0..n {
            for k in 0..n {
                out[i * w + k] = sg * metric.g_inv[i * n + k];
            }
            for b in 0..m {
                let mut s = 0.0;
                for j in 0..n {
                    s += metric.g_inv[i * n + j] * jac.get(j, b);
                }
                out[i * w + n + b] = sg * s;
            }
        }
        Ok(out)
    };

    let w = n + m;
    let mut lap = vec![0.0; w];
    for i in 0..n {
        let lo = flux(stencil[2 * i])?;
        let hi = flux(stencil[2 * i + 1])?;
        for c in 0..w {
            lap[c] += (hi[i * w + c] - lo[i * w + c]) / (2.0 * h);
        }
    }
    let jac = crate::stencil::gradient_at(f, node)?;
    let here = induced_metric(&jac)?;
    let sg = here.det_g.sqrt();
    for v in lap.iter_mut() {
        *v /= sg;
    }
    let mut worst = 0.0f64;
    for k in 0..n {
        let mut pairing = lap[k];
        for b in 0..m {
            pairing -= jac.get(k, b) * lap[n + b];
        }
        worst = worst.max(pairing.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Affine, Monomial, Polynomial, SmoothMap};
    use crate::lattice::{build_grid, ConvexDomain};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    /// Random `n × m` Jacobian rescaled so that its largest singular value is `target`.
    fn random_jacobian(r: &mut impl Rng, n: usize, m: usize, target: f64) -> Jacobian {
        let mut j = Jacobian { n, m, data: (0..n * m).map(|_| r.random::<f64>() - 0.5).collect() };
        let l1 = singular_values(&j).largest();
        j.data.iter_mut().for_each(|v| *v *= target / l1);
        j
    }

    /// Roots of the monic cubic `t³ + a t² + b t + c` (all real), trigonometric form.
    fn cubic_roots(a: f64, b: f64, c: f64) -> [f64; 3] {
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        if p.abs() < 1e-300 {
            let t = -q.cbrt();
            return [t - a / 3.0; 3];
        }
        let r = (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - a / 3.0;
        }
        out
    }

    #[test]
    fn zero_jacobian() {
        let j = Jacobian::zeros(3, 2);
        assert_eq!(singular_values(&j).0, vec![0.0, 0.0, 0.0]);
        let g = induced_metric(&j).unwrap();
        assert_eq!(g.g, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(g.g_inv, g.g);
        assert_eq!(g.det_g, 1.0);
    }

    #[test]
    fn rank_one_jacobian() {
        let j = Jacobian::from_rows(&[vec![0.6], vec![0.0]]);
        let s = singular_values(&j);
        assert!((s.0[0] - 0.6).abs() < 1e-15 && s.0[1] == 0.0);
        let g = induced_metric(&j).unwrap();
        assert!((g.g[0] - 0.64).abs() < 1e-15 && g.g[3] == 1.0);
        assert!((g.g_inv[0] - 1.5625).abs() < 1e-14 && g.g_inv[3] == 1.0);
        // eigenvalues of the inverse metric sit in [1, 1/(1 − λ₁²)]
        assert!(g.g_inv[0] <= 1.0 / (1.0 - 0.36) + 1e-12);
    }

    #[test]
    fn angle_values() {
        assert_eq!(hyperbolic_angle(&SingularSpectrum(vec![0.0, 0.0])).unwrap().cosh_theta, 1.0);
        let a = hyperbolic_angle(&SingularSpectrum(vec![0.6, 0.0])).unwrap().cosh_theta;
        assert!((a - 1.25).abs() < 1e-15);
        let b = hyperbolic_angle(&SingularSpectrum(vec![0.8, 0.6])).unwrap().cosh_theta;
        assert!((b - 1.0 / 0.48).abs() < 1e-14);
        assert!(matches!(hyperbolic_angle(&SingularSpectrum(vec![1.0, 0.0])), Err(Error::NotSpacelike { .. })));
    }

    #[test]
    fn non_spacelike_metric_is_an_error() {
        let j = Jacobian::from_rows(&[vec![1.2], vec![0.0]]);
        assert!(matches!(induced_metric(&j), Err(Error::NotSpacelike { .. })));
        let edge = Jacobian::from_rows(&[vec![1.0 - 1e-7], vec![0.0]]);
        assert!(matches!(induced_metric(&edge), Err(Error::NotSpacelike { .. })));
    }

    #[test]
    fn spectrum_matches_cubic_roots() {
        let mut r = rng(11);
        for _ in 0..200 {
            let j = Jacobian { n: 3, m: 2, data: (0..6).map(|_| r.random::<f64>() - 0.5).collect() };
            let mut a = [0.0; 9];
            linalg::gram(&j.data, 3, 2, &mut a);
            // characteristic polynomial t³ − tr t² + c₂ t − det
            let tr = a[0] + a[4] + a[8];
            let c2 = a[0] * a[4] - a[1] * a[3] + a[0] * a[8] - a[2] * a[6] + a[4] * a[8] - a[5] * a[7];
            let det = linalg::determinant(&a, 3);
            let mut roots = cubic_roots(-tr, c2, -det);
            roots.sort_by(|x, y| y.total_cmp(x));
            let s = singular_values(&j);
            for k in 0..3 {
                let want = roots[k].max(0.0).sqrt();
                assert!((s.0[k] - want).abs() < 1e-7 || (s.0[k] * s.0[k] - roots[k].max(0.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn metric_identities_for_random_spacelike_jacobians() {
        let mut r = rng(5);
        for _ in 0..500 {
            let target = 0.95 * r.random::<f64>();
            let j = random_jacobian(&mut r, 3, 2, target);
            let g = induced_metric(&j).unwrap();
            let s = singular_values(&j);
            for a in 0..3 {
                for b in 0..3 {
                    let prod: f64 = (0..3).map(|k| g.g[a * 3 + k] * g.g_inv[k * 3 + b]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((prod - want).abs() < 1e-11);
                    let jjt: f64 = (0..2).map(|k| j.get(a, k) * j.get(b, k)).sum();
                    assert!((g.g[a * 3 + b] - (want - jjt)).abs() < 1e-13);
                }
            }
            let d = s.metric_determinant();
            assert!((g.det_g - d).abs() <= 1e-10 * d);
            let ch = hyperbolic_angle(&s).unwrap().cosh_theta;
            assert!((ch - 1.0 / g.det_g.sqrt()).abs() <= 1e-10 * ch);
            // 1 − λ₁² ≥ ∏(1 − λᵢ²) = 1/cosh²θ
            assert!(1.0 - s.largest().powi(2) >= 1.0 / (ch * ch) - 1e-12);
            // eigenvalues of g⁻¹
            let mut w = g.g_inv.clone();
            let mut e = [0.0; 3];
            linalg::sym_eigenvalues_jacobi(&mut w, 3, &mut e);
            let upper = 1.0 / (1.0 - s.largest().powi(2));
            for v in e {
                assert!(v >= 1.0 - 1e-10 && v <= upper + 1e-10, "{v} not in [1, {upper}]");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn spectrum_invariant_under_orthogonal_factors(seed in 0u64..10_000, n in 2usize..=3, m in 1usize..=3) {
            let mut r = rng(seed);
            let j = random_jacobian(&mut r, n, m, 0.9);
            let s = singular_values(&j);
            // left: permutation of rows (reverse), right: random Givens rotation in R^m
            let theta = r.random::<f64>() * std::f64::consts::TAU;
            let (c, sn) = (theta.cos(), theta.sin());
            let mut t = Jacobian::zeros(n, m);
            for i in 0..n {
                let src = n - 1 - i;
                for b in 0..m {
                    t.data[i * m + b] = j.get(src, b);
                }
                if m >= 2 {
                    let (x, y) = (t.data[i * m], t.data[i * m + 1]);
                    t.data[i * m] = c * x - sn * y;
                    t.data[i * m + 1] = sn * x + c * y;
                }
            }
            let st = singular_values(&t);
            for k in 0..n {
                prop_assert!((s.0[k] * s.0[k] - st.0[k] * st.0[k]).abs() < 1e-12);
            }
        }
    }

    fn grid(min: Vec<f64>, max: Vec<f64>, h: f64) -> Arc<crate::lattice::Grid> {
        Arc::new(build_grid(&ConvexDomain::new_box(min, max).unwrap(), h).unwrap())
    }

    #[test]
    fn affine_tension_vanishes() {
        let g = grid(vec![0.0; 2], vec![1.0; 2], 0.1);
        let a = Affine::new(vec![vec![0.5, -0.3], vec![0.2, 0.4]], vec![0.0, 1.0]);
        let f = GraphMap::sample(g.clone(), &a);
        for &node in g.interior() {
            let t = tension(&f, node).unwrap();
            assert!(t.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn paraboloid_tension_at_critical_point() {
        let g = grid(vec![-0.5; 2], vec![0.5; 2], 0.125);
        let p = Polynomial {
            n: 2,
            components: vec![vec![
                Monomial { exponents: vec![2, 0], coefficient: 0.1 },
                Monomial { exponents: vec![0, 2], coefficient: 0.1 },
            ]],
        };
        let f = GraphMap::sample(g.clone(), &p);
        let node = g.node_at(&[4, 4]).unwrap();
        let t = tension(&f, node).unwrap();
        assert!((t[0] - 0.4).abs() < 1e-14, "{}", t[0]);
    }

    #[test]
    fn affine_normality_residual_vanishes() {
        let g = grid(vec![0.0; 2], vec![1.0; 2], 0.1);
        let a = Affine::new(vec![vec![0.5, -0.3]], vec![0.0]);
        let f = GraphMap::sample(g.clone(), &a);
        let node = g.node_at(&[5, 5]).unwrap();
        assert!(laplace_beltrami_normality(&f, node).unwrap() < 1e-12);
        // next to the boundary the second ring is missing
        let edge = g.node_at(&[1, 5]).unwrap();
        assert_eq!(laplace_beltrami_normality(&f, edge).unwrap_err(), Error::InsufficientStencil(edge));
    }

    #[derive(Debug)]
    struct Smooth;
    impl SmoothMap for Smooth {
        fn dim(&self) -> usize {
            2
        }
        fn codim(&self) -> usize {
            2
        }
        fn value(&self, x: &[f64], out: &mut [f64]) {
            out[0] = 0.2 * x[0] * x[0] * x[1] + 0.1 * x[1].powi(3) - 0.15 * x[0];
            out[1] = 0.1 * (x[0] * x[1]).powi(2) + 0.2 * x[1] - 0.1 * x[0].powi(3);
        }
        fn jacobian(&self, _: &[f64], _: &mut [f64]) {
            unimplemented!()
        }
        fn hessian(&self, _: &[f64], _: &mut [f64]) {
            unimplemented!()
        }
    }

    #[test]
    fn normality_residual_is_second_order_for_smooth_map() {
        let at = |h: f64| {
            let g = grid(vec![0.0; 2], vec![1.0; 2], h);
            let f = GraphMap::sample(g.clone(), &Smooth);
            let k = (0.5 / h).round() as usize;
            let node = g.node_at(&[k, k]).unwrap();
            let j = crate::stencil::gradient_at(&f, node).unwrap();
            assert!(singular_values(&j).largest() < 0.5);
            laplace_beltrami_normality(&f, node).unwrap()
        };
        let (e1, e2, e3) = (at(1.0 / 16.0), at(1.0 / 32.0), at(1.0 / 64.0));
        let (r1, r2) = (e1 / e2, e2 / e3);
        assert!((3.0..=5.0).contains(&r1) && (3.0..=5.0).contains(&r2), "{e1} {e2} {e3}");
    }
}
