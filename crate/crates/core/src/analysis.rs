//! The existence theory in executable form: the solvability condition, the
//! initial hyperbolic angle bound `η₀`, the barrier construction behind the
//! boundary gradient estimate, and the per-step monitor records.
//!
//! Sups of `|Dψ|` and `|D²ψ|` are estimates taken on a lattice
//! [`SAMPLING_FACTOR`] times finer than the solver grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::fields::SmoothMap;
use crate::flow::FlowState;
use crate::lattice::{ConvexDomain, Hyperplane, NodeClass};
use crate::linalg;
use crate::scenario::Problem;
use crate::stencil::{GraphMap, Jacobian};
use crate::{Error, Result};

pub const SAMPLING_FACTOR: usize = 4;
/// Angles swept for planar second-derivative sups.
pub const PLANAR_ANGLES: usize = 720;
/// Random directions (then refined by ascent) for `n >= 3`.
pub const SPHERE_DIRECTIONS: usize = 4096;
pub const ASCENT_STEPS: usize = 20;
/// Barrier probes per facet.
pub const PROBES_PER_FACE: usize = 8;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Sampled sups of the first and second derivatives of a map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiNorms {
    pub sup_dpsi_boundary: f64,
    pub sup_dpsi_domain: f64,
    pub sup_d2psi: f64,
    /// `sup √(Σ_β σmax(D²ψ^β)²)`, an upper bound for `sup_d2psi`.
    pub sup_d2psi_upper: f64,
}

/// `sup_{|v|=1} |(vᵀ H_β v)_β|` for a Hessian stack `hess` (`m × n × n`).
pub struct DirectionSearch {
    n: usize,
    m: usize,
    directions: Vec<Vec<f64>>,
}

impl DirectionSearch {
    pub fn new(n: usize, m: usize) -> Self {
        let directions = if n == 2 {
            (0..PLANAR_ANGLES)
                .map(|k| {
                    let a = std::f64::consts::PI * k as f64 / PLANAR_ANGLES as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0xd1ec);
            (0..SPHERE_DIRECTIONS)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let r = linalg::norm(&v);
                    v.into_iter().map(|x| x / r).collect()
                })
                .collect()
        };
        DirectionSearch { n, m, directions }
    }

    fn objective(&self, hess: &[f64], v: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for b in 0..self.m {
            let h = &hess[b * n * n..(b + 1) * n * n];
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    q += v[i] * h[i * n + j] * v[j];
                }
            }
            total += q * q;
        }
        total
    }

    /// `√(Σ_β σmax(H_β)²)`.
    pub fn upper_bound(&self, hess: &[f64]) -> f64 {
        let n = self.n;
        let mut work = vec![0.0; n * n];
        let mut eig = vec![0.0; n];
        let mut total = 0.0;
        for b in 0..self.m {
            work.copy_from_slice(&hess[b * n * n..(b + 1) * n * n]);
            linalg::sym_eigenvalues_jacobi(&mut work, n, &mut eig);
            let s = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            total += s * s;
        }
        total.sqrt()
    }

    pub fn sup(&self, hess: &[f64]) -> f64 {
        let mut best = 0.0;
        let mut best_v = &self.directions[0];
        for v in &self.directions {
            let f = self.objective(hess, v);
            if f > best {
                best = f;
                best_v = v;
            }
        }
        if self.n > 2 {
            best = self.ascend(hess, best_v.clone(), best);
        }
        best.sqrt()
    }

    fn ascend(&self, hess: &[f64], mut v: Vec<f64>, mut best: f64) -> f64 {
        let n = self.n;
        let mut step = 0.1;
        for _ in 0..ASCENT_STEPS {
            // ∇F = 4 Σ_β q_β H_β v, projected onto the tangent space at v
            let mut g = vec![0.0; n];
            for b in 0..self.m {
                let h = &hess[b * n * n..(b + 1) * n * n];
                let hv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * v[j]).sum()).collect();
                let q: f64 = hv.iter().zip(&v).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    g[i] += 4.0 * q * hv[i];
                }
            }
            let radial: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            g.iter_mut().zip(&v).for_each(|(gi, vi)| *gi -= radial * vi);
            let gn = linalg::norm(&g);
            if gn == 0.0 {
                break;
            }
            let mut trial: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a + step * b / gn).collect();
            let tn = linalg::norm(&trial);
            trial.iter_mut().for_each(|x| *x /= tn);
            let f = self.objective(hess, &trial);
            if f > best {
                best = f;
                v = trial;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        best
    }
}

/// Visits the points of a lattice of spacing `hf` covering `domain`'s
/// bounding box that lie in the closed domain.
fn for_each_fine_point(domain: &ConvexDomain, hf: f64, mut visit: impl FnMut(&[f64])) {
    let (lo, hi) = domain.bounding_box();
    let n = lo.len();
    let extents: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| ((b - a) / hf + 1e-9).floor() as usize + 1).collect();
    let mut idx = vec![0usize; n];
    let mut x = lo.clone();
    loop {
        for k in 0..n {
            x[k] = lo[k] + idx[k] as f64 * hf;
        }
        if domain.contains(&x, crate::lattice::CLASSIFY_SLACK) {
            visit(&x);
        }
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < extents[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Sampled norms and `η₀` in one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub norms: PsiNorms,
    /// `Ok(η₀)`, or the largest singular value and the sample where it occurred.
    pub eta0: std::result::Result<f64, f64>,
}

fn largest_singular_value(jac: &[f64], n: usize, m: usize, gram: &mut [f64], eig: &mut [f64]) -> (f64, f64) {
    linalg::gram(jac, n, m, gram);
    linalg::sym_eigenvalues_jacobi(gram, n, eig);
    let mut l1 = 0.0f64;
    let mut det = 1.0;
    for &e in eig.iter() {
        let e = e.max(0.0);
        l1 = l1.max(e);
        det *= 1.0 - e;
    }
    (l1.sqrt(), det)
}

pub fn sweep(psi: &dyn SmoothMap, domain: &ConvexDomain, h: f64) -> Result<Sweep> {
    let n = psi.dim();
    let m = psi.codim();
    if domain.dim() != n {
        return Err(Error::DimensionMismatch(format!("map on R^{n}, domain in R^{}", domain.dim())));
    }
    let hf = h / SAMPLING_FACTOR as f64;
    let search = DirectionSearch::new(n, m);
    let mut jac = vec![0.0; n * m];
    let mut hess = vec![0.0; m * n * n];
    let mut gram = vec![0.0; n * n];
    let mut eig = vec![0.0; n];
    let mut norms = PsiNorms { sup_dpsi_boundary: 0.0, sup_dpsi_domain: 0.0, sup_d2psi: 0.0, sup_d2psi_upper: 0.0 };
    let mut eta0 = 1.0f64;
    let mut worst_l1 = 0.0f64;
    let mut finite = true;
    let mut searched: Vec<f64> = Vec::new();
    for_each_fine_point(domain, hf, |x| {
        psi.jacobian(x, &mut jac);
        psi.hessian(x, &mut hess);
        if jac.iter().chain(&hess).any(|v| !v.is_finite()) {
            finite = false;
            return;
        }
        let (l1, det) = largest_singular_value(&jac, n, m, &mut gram, &mut eig);
        norms.sup_dpsi_domain = norms.sup_dpsi_domain.max(l1);
        worst_l1 = worst_l1.max(l1);
        if l1 < 1.0 {
            eta0 = eta0.max(1.0 / det.sqrt());
        }
        let upper = search.upper_bound(&hess);
        norms.sup_d2psi_upper = norms.sup_d2psi_upper.max(upper);
        // the search cannot beat the bound, so skip points that cannot raise the sup
        // and points whose Hessian equals the last one searched
        if upper > norms.sup_d2psi && hess != searched {
            norms.sup_d2psi = norms.sup_d2psi.max(search.sup(&hess).min(upper));
            searched.clone_from(&hess);
        }
        if domain.signed_gap(x) >= -hf {
            let p = domain.project_to_boundary(x);
            psi.jacobian(&p, &mut jac);
            let (lb, _) = largest_singular_value(&jac, n, m, &mut gram, &mut eig);
            norms.sup_dpsi_boundary = norms.sup_dpsi_boundary.max(lb);
        }
    });
    if !finite {
        return Err(Error::NonFinite);
    }
    let eta0 = if worst_l1 < 1.0 { Ok(eta0) } else { Err(worst_l1) };
    Ok(Sweep { norms, eta0 })
}

/// Sampled `(sup_∂Ω |Dψ|, sup_Ω |Dψ|, sup_Ω |D²ψ|)` and the upper bound.
pub fn psi_norms(psi: &dyn SmoothMap, domain: &ConvexDomain, h: f64) -> Result<PsiNorms> {
    Ok(sweep(psi, domain, h)?.norms)
}

/// `η₀ = max cosh θ` over the graph of `psi`, sampled.
pub fn eta0(psi: &dyn SmoothMap, domain: &ConvexDomain, h: f64) -> Result<f64> {
    sweep(psi, domain, h)?.eta0.map_err(|l1| Error::NotSpacelike { lambda1: l1, node: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub sup_d2psi: f64,
    pub sup_dpsi_boundary: f64,
    pub eta0: f64,
    pub lhs: f64,
    pub satisfied: bool,
    pub sup_dpsi_domain: f64,
    pub sup_d2psi_upper: f64,
    /// Left side with the upper bound for `sup |D²ψ|`.
    pub lhs_upper: f64,
    pub sampling_factor: usize,
    pub note: String,
}

pub fn condition_lhs(n: usize, delta: f64, eta0: f64, sup_d2psi: f64, sup_dpsi_boundary: f64) -> f64 {
    4.0 * n as f64 * eta0 * eta0 * delta * sup_d2psi + SQRT_2 * sup_dpsi_boundary
}

/// Assembles the report from its parts.
pub fn condition_report(n: usize, m: usize, delta: f64, norms: &PsiNorms, eta0: f64) -> ConditionReport {
    let lhs = condition_lhs(n, delta, eta0, norms.sup_d2psi, norms.sup_dpsi_boundary);
    ConditionReport {
        n,
        m,
        delta,
        sup_d2psi: norms.sup_d2psi,
        sup_dpsi_boundary: norms.sup_dpsi_boundary,
        eta0,
        lhs,
        satisfied: lhs < 1.0,
        sup_dpsi_domain: norms.sup_dpsi_domain,
        sup_d2psi_upper: norms.sup_d2psi_upper,
        lhs_upper: condition_lhs(n, delta, eta0, norms.sup_d2psi_upper, norms.sup_dpsi_boundary),
        sampling_factor: SAMPLING_FACTOR,
        note: "the condition is sufficient for solvability, not necessary; sups are sampled estimates".into(),
    }
}

/// Evaluates the solvability condition for the problem's initial map.
pub fn check_condition(problem: &Problem) -> Result<ConditionReport> {
    let s = sweep(problem.initial.as_ref(), &problem.domain, problem.spec.grid.h)?;
    let eta0 = s.eta0.map_err(|l1| Error::NotSpacelike { lambda1: l1, node: None })?;
    Ok(condition_report(problem.spec.dimensions.n, problem.spec.dimensions.m, problem.domain.diameter(), &s.norms, eta0))
}

/// Barrier `S = v log(1 + k d_p) ∓ (f^α − ψ^α)` at the boundary point `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierParams {
    pub k: f64,
    pub v: f64,
    pub vk: f64,
    pub p: Vec<f64>,
    pub hyperplane: Hyperplane,
}

fn check_xi(xi: f64) -> Result<()> {
    if (0.0..1.0).contains(&xi) {
        Ok(())
    } else {
        Err(Error::InvalidXi(xi))
    }
}

/// Parameters minimizing `vk`: `k = 1/δ`, `vk = 4nδ sup|D²ψ| / (1 − ξ)`.
pub fn barrier_params(
    delta: f64,
    xi: f64,
    n: usize,
    sup_d2psi: f64,
    p: &[f64],
    hyperplane: Hyperplane,
) -> Result<BarrierParams> {
    check_xi(xi)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("diameter must be positive, got {delta}")));
    }
    let k = 1.0 / delta;
    let vk = 4.0 * n as f64 * delta * sup_d2psi / (1.0 - xi);
    Ok(BarrierParams { k, v: vk * delta, vk, p: p.to_vec(), hyperplane })
}

fn bound_with_factor(delta: f64, factor: f64, n: usize, sup_d2psi: f64, sup_dpsi_boundary: f64) -> f64 {
    4.0 * n as f64 * factor * delta * sup_d2psi + SQRT_2 * sup_dpsi_boundary
}

/// `4nδ/(1 − ξ) · sup|D²ψ| + √2 sup_∂Ω |Dψ|` with a measured `ξ`.
pub fn boundary_gradient_bound(delta: f64, xi: f64, n: usize, sup_d2psi: f64, sup_dpsi_boundary: f64) -> Result<f64> {
    check_xi(xi)?;
    Ok(bound_with_factor(delta, 1.0 / (1.0 - xi), n, sup_d2psi, sup_dpsi_boundary))
}

/// The bound with the a priori `ξ ≤ 1 − 1/η₀²`, so that `1/(1 − ξ) = η₀²`.
pub fn boundary_gradient_bound_theoretical(
    delta: f64,
    eta0: f64,
    n: usize,
    sup_d2psi: f64,
    sup_dpsi_boundary: f64,
) -> Result<f64> {
    if !(eta0 >= 1.0 && eta0.is_finite()) {
        return Err(Error::InvalidXi(1.0 - 1.0 / (eta0 * eta0)));
    }
    Ok(bound_with_factor(delta, eta0 * eta0, n, sup_d2psi, sup_dpsi_boundary))
}

/// `min` over non-exterior nodes of `v log(1 + k d_p) − sign (f^α − ψ^α)`,
/// with `ψ` the initial map.
pub fn barrier_margin(state: &FlowState, initial: &GraphMap, params: &BarrierParams, alpha: usize, sign: f64) -> f64 {
    let grid = state.f.grid();
    let m = state.f.codim();
    let mut x = vec![0.0; grid.dim()];
    let mut worst = f64::INFINITY;
    for node in 0..grid.node_count() {
        if grid.class(node) == NodeClass::Exterior {
            continue;
        }
        grid.position_into(node, &mut x);
        let d = params.hyperplane.distance(&x).max(0.0);
        let diff = state.f.values()[node * m + alpha] - initial.values()[node * m + alpha];
        worst = worst.min(params.v * (params.k * d).ln_1p() - sign * diff);
    }
    worst
}

/// Jacobian at a boundary node from one-sided differences: centered where
/// both axis neighbors exist, otherwise the 3-point or 2-point one-sided formula.
pub fn boundary_jacobian(f: &GraphMap, node: usize) -> Jacobian {
    let grid = f.grid();
    let n = grid.dim();
    let m = f.codim();
    let h = grid.spacing();
    let base = grid.multi_index(node);
    let live = |axis: usize, d: i64| -> Option<usize> {
        let v = base[axis] as i64 + d;
        if v < 0 {
            return None;
        }
        let mut idx = base.clone();
        idx[axis] = v as usize;
        grid.node_at(&idx).filter(|&k| grid.class(k) != NodeClass::Exterior)
    };
    let mut jac = Jacobian::zeros(n, m);
    let f0 = f.value(node);
    for i in 0..n {
        let (p1, m1) = (live(i, 1), live(i, -1));
        for b in 0..m {
            let d = match (p1, m1) {
                (Some(p), Some(q)) => (f.value(p)[b] - f.value(q)[b]) / (2.0 * h),
                (Some(p), None) => match live(i, 2) {
                    Some(p2) => (-3.0 * f0[b] + 4.0 * f.value(p)[b] - f.value(p2)[b]) / (2.0 * h),
                    None => (f.value(p)[b] - f0[b]) / h,
                },
                (None, Some(q)) => match live(i, -2) {
                    Some(q2) => (3.0 * f0[b] - 4.0 * f.value(q)[b] + f.value(q2)[b]) / (2.0 * h),
                    None => (f0[b] - f.value(q)[b]) / h,
                },
                (None, None) => 0.0,
            };
            jac.data[i * m + b] = d;
        }
    }
    jac
}

/// Largest singular value of the one-sided Jacobian over boundary nodes.
pub fn measured_boundary_gradient(f: &GraphMap) -> f64 {
    f.grid()
        .boundary()
        .iter()
        .map(|&node| crate::metric::singular_values(&boundary_jacobian(f, node)).largest())
        .fold(0.0, f64::max)
}

/// One row of the diagnostics series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub residual_sup: f64,
    pub max_cosh_theta: f64,
    pub sup_df: f64,
    /// `min_α (max f₀^α − max f_t^α)` over nodes.
    pub max_principle_margin: f64,
    /// Measured-ξ boundary gradient bound minus the measured boundary `|Df|`.
    pub boundary_grad_margin: f64,
    /// Smallest barrier value over probes, components and both signs.
    pub barrier_margin: f64,
    /// `(1 − 1/η₀²) − max λᵢλⱼ` over interior nodes, `i ≠ j`.
    pub product_bound_margin: f64,
}

struct Probe {
    /// `log(1 + d_p/δ)` at each live node.
    log_distance: Vec<f64>,
}

/// Everything about a problem the diagnostics need, computed once.
pub struct Monitor {
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub norms: Option<PsiNorms>,
    /// `NaN` if the initial map is not spacelike.
    pub eta0: f64,
    initial: GraphMap,
    initial_max: Vec<f64>,
    live: Vec<usize>,
    probes: Vec<Probe>,
}

impl Monitor {
    pub fn new(problem: &Problem) -> Monitor {
        let initial = problem.initial_graph();
        let grid = initial.grid().clone();
        let m = initial.codim();
        let delta = problem.domain.diameter();
        let swept = sweep(problem.initial.as_ref(), &problem.domain, problem.spec.grid.h).ok();
        let norms = swept.map(|s| s.norms);
        let eta0 = swept.and_then(|s| s.eta0.ok()).unwrap_or(f64::NAN);
        let live: Vec<usize> = (0..grid.node_count()).filter(|&k| grid.class(k) != NodeClass::Exterior).collect();
        let mut initial_max = vec![f64::NEG_INFINITY; m];
        for &k in &live {
            for (b, v) in initial.value(k).iter().enumerate() {
                initial_max[b] = initial_max[b].max(*v);
            }
        }
        let per_face = PROBES_PER_FACE;
        let mut x = vec![0.0; grid.dim()];
        let probes = problem
            .domain
            .boundary_probes(per_face)
            .into_iter()
            .filter_map(|p| problem.domain.supporting_hyperplane(&p).ok())
            .map(|plane| Probe {
                log_distance: live
                    .iter()
                    .map(|&k| {
                        grid.position_into(k, &mut x);
                        (plane.distance(&x).max(0.0) / delta).ln_1p()
                    })
                    .collect(),
            })
            .collect();
        Monitor { n: grid.dim(), m, delta, norms, eta0, initial, initial_max, live, probes }
    }

    pub fn initial(&self) -> &GraphMap {
        &self.initial
    }

    pub fn probe_count(&self) -> usize {
        self.probes.len()
    }

    pub fn measured_boundary_gradient(&self, f: &GraphMap) -> f64 {
        measured_boundary_gradient(f)
    }

    /// Fills a record for `state`; `xi` already includes `boundary_df²`.
    pub fn record(&self, state: &FlowState, dt: f64, xi: f64, boundary_df: f64) -> DiagnosticsRecord {
        let m = self.m;
        let values = state.f.values();
        let mut max_principle = f64::INFINITY;
        for b in 0..m {
            let now = self.live.iter().map(|&k| values[k * m + b]).fold(f64::NEG_INFINITY, f64::max);
            max_principle = max_principle.min(self.initial_max[b] - now);
        }

        let (grad_margin, barrier) = match self.norms {
            Some(norms) => {
                let bound = boundary_gradient_bound(self.delta, xi, self.n, norms.sup_d2psi, norms.sup_dpsi_boundary);
                let grad = bound.map(|b| b - boundary_df).unwrap_or(f64::NAN);
                let v = if (0.0..1.0).contains(&xi) {
                    4.0 * self.n as f64 * self.delta * norms.sup_d2psi / (1.0 - xi) * self.delta
                } else {
                    f64::NAN
                };
                let init = self.initial.values();
                let mut worst = f64::INFINITY;
                for probe in &self.probes {
                    for (j, &k) in self.live.iter().enumerate() {
                        let lift = v * probe.log_distance[j];
                        for b in 0..m {
                            worst = worst.min(lift - (values[k * m + b] - init[k * m + b]).abs());
                        }
                    }
                }
                (grad, worst)
            }
            None => (f64::NAN, f64::NAN),
        };

        let n = self.n;
        let mut pair = 0.0f64;
        for sp in state.spectra.chunks(n) {
            if n >= 2 {
                pair = pair.max(sp[0] * sp[1]);
            }
        }
        let product = 1.0 - 1.0 / (self.eta0 * self.eta0) - pair;

        DiagnosticsRecord {
            step: state.step,
            t: state.t,
            dt,
            residual_sup: state.residual_sup,
            max_cosh_theta: state.max_cosh_theta,
            sup_df: state.sup_df,
            max_principle_margin: max_principle,
            boundary_grad_margin: grad_margin,
            barrier_margin: barrier,
            product_bound_margin: product,
        }
    }
}
