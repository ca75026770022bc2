//! Exact solutions and independent recomputations used as ground truth.
//!
//! Every exact solution carries a closed form that can be evaluated on
//! hyper-dual numbers, which gives first and second derivatives to rounding
//! error without touching the hand-written derivative code. That path is used
//! to verify a solution before anything relies on it.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{Affine, Constant, SmoothMap};
use crate::lattice::{ConvexDomain, NodeClass};
use crate::linalg;
use crate::stencil::GraphMap;
use crate::{Error, Result, SPACELIKE_GUARD};

/// Errors at or below this level are treated as exact and excluded from order fits.
pub const ORDER_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------------
// hyper-dual arithmetic

/// `a + b ε₁ + c ε₂ + d ε₁ε₂` with `ε₁² = ε₂² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl HyperDual {
    pub fn constant(a: f64) -> Self {
        HyperDual { a, b: 0.0, c: 0.0, d: 0.0 }
    }

    /// Applies a scalar function given its value and first two derivatives at `self.a`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        HyperDual { a: f, b: df * self.b, c: df * self.c, d: df * self.d + d2f * self.b * self.c }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        HyperDual { a: self.a + o.a, b: self.b + o.b, c: self.c + o.c, d: self.d + o.d }
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        HyperDual { a: self.a - o.a, b: self.b - o.b, c: self.c - o.c, d: self.d - o.d }
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        HyperDual {
            a: self.a * o.a,
            b: self.a * o.b + self.b * o.a,
            c: self.a * o.c + self.c * o.a,
            d: self.a * o.d + self.b * o.c + self.c * o.b + self.d * o.a,
        }
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = o.chain(1.0 / o.a, -1.0 / (o.a * o.a), 2.0 / (o.a * o.a * o.a));
        self * inv
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        HyperDual { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }
}

/// The operations closed forms are written against.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn sqrt(self) -> Self;
    fn ln(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
}

impl Scalar for HyperDual {
    fn from_f64(v: f64) -> Self {
        HyperDual::constant(v)
    }
    fn sqrt(self) -> Self {
        let s = self.a.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.a))
    }
    fn ln(self) -> Self {
        self.chain(self.a.ln(), 1.0 / self.a, -1.0 / (self.a * self.a))
    }
}

// ---------------------------------------------------------------------------
// closed forms

/// Closed-form description of an exact solution, evaluable on any [`Scalar`].
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    Constant { n: usize, value: Vec<f64> },
    /// `A` row-major `m × n`.
    Affine { n: usize, m: usize, matrix: Vec<f64>, offset: Vec<f64> },
    Catenoid { c: f64 },
    /// Coefficients of `p(z) = Σ a_k z^k`.
    Holomorphic { coefficients: Vec<Complex64> },
}

impl ClosedForm {
    pub fn dim(&self) -> usize {
        match self {
            ClosedForm::Constant { n, .. } | ClosedForm::Affine { n, .. } => *n,
            ClosedForm::Catenoid { .. } | ClosedForm::Holomorphic { .. } => 2,
        }
    }

    pub fn codim(&self) -> usize {
        match self {
            ClosedForm::Constant { value, .. } => value.len(),
            ClosedForm::Affine { m, .. } => *m,
            ClosedForm::Catenoid { .. } => 1,
            ClosedForm::Holomorphic { .. } => 2,
        }
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        match self {
            ClosedForm::Constant { value, .. } => value.iter().map(|&v| S::from_f64(v)).collect(),
            ClosedForm::Affine { n, m, matrix, offset } => (0..*m)
                .map(|b| {
                    let mut s = S::from_f64(offset[b]);
                    for i in 0..*n {
                        s = s + S::from_f64(matrix[b * n + i]) * x[i];
                    }
                    s
                })
                .collect(),
            ClosedForm::Catenoid { c } => {
                let c = S::from_f64(*c);
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let q = r / c;
                // arcsinh q = ln(q + √(q² + 1))
                vec![c * (q + (q * q + S::from_f64(1.0)).sqrt()).ln()]
            }
            ClosedForm::Holomorphic { coefficients } => {
                let (mut re, mut im) = (S::from_f64(0.0), S::from_f64(0.0));
                for a in coefficients.iter().rev() {
                    let nr = re * x[0] - im * x[1] + S::from_f64(a.re);
                    let ni = re * x[1] + im * x[0] + S::from_f64(a.im);
                    re = nr;
                    im = ni;
                }
                vec![re, im]
            }
        }
    }

    /// Value, Jacobian (`n × m`) and Hessian stack (`m × n × n`) by hyper-dual evaluation.
    pub fn derivatives(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let m = self.codim();
        let mut jac = vec![0.0; n * m];
        let mut hess = vec![0.0; m * n * n];
        let mut value = vec![0.0; m];
        for i in 0..n {
            for j in i..n {
                let mut hx: Vec<HyperDual> = x.iter().map(|&v| HyperDual::constant(v)).collect();
                hx[i].b = 1.0;
                hx[j].c = 1.0;
                let out = self.eval(&hx);
                for b in 0..m {
                    value[b] = out[b].a;
                    if i == j {
                        jac[i * m + b] = out[b].b;
                    }
                    hess[b * n * n + i * n + j] = out[b].d;
                    hess[b * n * n + j * n + i] = out[b].d;
                }
            }
        }
        (value, jac, hess)
    }
}

/// Lorentzian catenoid `f(x) = c·arcsinh(|x|/c)` in the plane, with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Catenoid {
    pub c: f64,
}

impl SmoothMap for Catenoid {
    fn dim(&self) -> usize {
        2
    }
    fn codim(&self) -> usize {
        1
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        let r = x[0].hypot(x[1]);
        out[0] = self.c * (r / self.c).asinh();
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        // u'(r) = c / √(r² + c²), Df = u' x / r
        let r2 = x[0] * x[0] + x[1] * x[1];
        let s = self.c / (r2 + self.c * self.c).sqrt();
        let r = r2.sqrt();
        out[0] = s * x[0] / r;
        out[1] = s * x[1] / r;
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        // D²f = u'' x xᵀ / r² + (u' / r)(I − x xᵀ / r²)
        let r2 = x[0] * x[0] + x[1] * x[1];
        let r = r2.sqrt();
        let w = r2 + self.c * self.c;
        let u1 = self.c / w.sqrt();
        let u2 = -self.c * r / (w * w.sqrt());
        for i in 0..2 {
            for j in 0..2 {
                let p = x[i] * x[j] / r2;
                let id = if i == j { 1.0 } else { 0.0 };
                out[i * 2 + j] = u2 * p + u1 / r * (id - p);
            }
        }
    }
}

/// `f = (Re p, Im p)` for a complex polynomial `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolomorphicPoly {
    pub coefficients: Vec<Complex64>,
}

impl HolomorphicPoly {
    fn eval_derivative(&self, z: Complex64, order: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, a) in self.coefficients.iter().enumerate().rev() {
            if k < order {
                break;
            }
            let falling: f64 = ((k - order + 1)..=k).map(|v| v as f64).product();
            acc = acc * z + a * falling;
        }
        acc
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        self.eval_derivative(z, 1)
    }
}

impl SmoothMap for HolomorphicPoly {
    fn dim(&self) -> usize {
        2
    }
    fn codim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        let p = self.eval_derivative(Complex64::new(x[0], x[1]), 0);
        out[0] = p.re;
        out[1] = p.im;
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        // Cauchy-Riemann: u_x = v_y = Re p', v_x = −u_y = Im p'
        let d = self.eval_derivative(Complex64::new(x[0], x[1]), 1);
        out[0] = d.re;
        out[1] = d.im;
        out[2] = -d.im;
        out[3] = d.re;
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.eval_derivative(Complex64::new(x[0], x[1]), 2);
        // u: [[Re, −Im], [−Im, −Re]]; v: [[Im, Re], [Re, −Im]]
        out[..4].copy_from_slice(&[d.re, -d.im, -d.im, -d.re]);
        out[4..].copy_from_slice(&[d.im, d.re, d.re, -d.im]);
    }
}

// ---------------------------------------------------------------------------
// exact solutions

/// Where an exact solution is a valid spacelike stationary graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Validity {
    Everywhere,
    /// Away from the lightlike axis `x = 0`.
    OffAxis,
}

#[derive(Clone)]
pub struct ExactSolution {
    pub id: String,
    pub map: Arc<dyn SmoothMap>,
    pub form: ClosedForm,
    pub validity: Validity,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution").field("id", &self.id).field("form", &self.form).finish()
    }
}

/// Outcome of [`ExactSolution::verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreUseCheck {
    pub samples: usize,
    /// Largest `|g^{ij} ∂ᵢ∂ⱼf|` from hyper-dual derivatives.
    pub max_tension: f64,
    /// Largest difference between hand-written and hyper-dual derivatives.
    pub max_derivative_mismatch: f64,
    pub max_lambda1: f64,
    /// Holomorphic only: largest of `|∂₁f·∂₂f|` and `||∂₁f|² − |∂₂f|²|`.
    pub max_conformal_defect: f64,
    /// Codimension one only: largest `|div(Df/√(1 − |Df|²))|`.
    pub max_divergence: f64,
}

impl PreUseCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_tension <= tol
            && self.max_derivative_mismatch <= tol
            && self.max_conformal_defect <= tol
            && self.max_divergence <= tol
            && self.max_lambda1 < 1.0
    }
}

impl ExactSolution {
    pub fn is_valid(&self, x: &[f64]) -> bool {
        match self.validity {
            Validity::Everywhere => true,
            Validity::OffAxis => x.iter().map(|v| v * v).sum::<f64>() > 0.0,
        }
    }

    /// Checks the solution at `points` against hyper-dual derivatives.
    pub fn verify(&self, points: &[Vec<f64>]) -> Result<PreUseCheck> {
        let n = self.form.dim();
        let m = self.form.codim();
        let mut out = PreUseCheck {
            samples: 0,
            max_tension: 0.0,
            max_derivative_mismatch: 0.0,
            max_lambda1: 0.0,
            max_conformal_defect: 0.0,
            max_divergence: 0.0,
        };
        let mut g = vec![0.0; n * n];
        let mut g_inv = vec![0.0; n * n];
        let mut work = vec![0.0; n * n];
        let mut eig = vec![0.0; n];
        for x in points.iter().filter(|x| self.is_valid(x)) {
            out.samples += 1;
            let (v, jac, hess) = self.form.derivatives(x);
            let mut hv = vec![0.0; m];
            let mut hj = vec![0.0; n * m];
            let mut hh = vec![0.0; m * n * n];
            self.map.value(x, &mut hv);
            self.map.jacobian(x, &mut hj);
            self.map.hessian(x, &mut hh);
            let mismatch = v
                .iter()
                .zip(&hv)
                .chain(jac.iter().zip(&hj))
                .chain(hess.iter().zip(&hh))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            out.max_derivative_mismatch = out.max_derivative_mismatch.max(mismatch);

            linalg::gram(&jac, n, m, &mut g);
            work.copy_from_slice(&g);
            linalg::sym_eigenvalues_jacobi(&mut work, n, &mut eig);
            let l1 = eig.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt();
            out.max_lambda1 = out.max_lambda1.max(l1);
            if l1 >= 1.0 {
                return Err(Error::NotSpacelike { lambda1: l1, node: None });
            }
            for (k, e) in g.iter_mut().enumerate() {
                *e = if k % (n + 1) == 0 { 1.0 - *e } else { -*e };
            }
            linalg::invert(&g, n, &mut g_inv, &mut work).ok_or(Error::NonFinite)?;
            for b in 0..m {
                let t: f64 = g_inv.iter().zip(&hess[b * n * n..(b + 1) * n * n]).map(|(a, h)| a * h).sum();
                out.max_tension = out.max_tension.max(t.abs());
            }

            if matches!(self.form, ClosedForm::Holomorphic { .. }) {
                let (f1, f2) = (&jac[0..2], &jac[2..4]);
                let cross = f1[0] * f2[0] + f1[1] * f2[1];
                let diff = (f1[0] * f1[0] + f1[1] * f1[1]) - (f2[0] * f2[0] + f2[1] * f2[1]);
                out.max_conformal_defect = out.max_conformal_defect.max(cross.abs()).max(diff.abs());
            }
            if m == 1 {
                // ∂ᵢ(fᵢ/W) = fᵢᵢ/W + fᵢfⱼfᵢⱼ/W³ with W = √(1 − |Df|²)
                let p2: f64 = jac.iter().map(|v| v * v).sum();
                let w = (1.0 - p2).sqrt();
                let mut div = 0.0;
                for i in 0..n {
                    div += hess[i * n + i] / w;
                    for j in 0..n {
                        div += jac[i] * jac[j] * hess[i * n + j] / (w * w * w);
                    }
                }
                out.max_divergence = out.max_divergence.max(div.abs());
            }
        }
        Ok(out)
    }
}

pub fn constant_solution(n: usize, value: Vec<f64>) -> ExactSolution {
    ExactSolution {
        id: "constant".into(),
        map: Arc::new(Constant { n, value: value.clone() }),
        form: ClosedForm::Constant { n, value },
        validity: Validity::Everywhere,
    }
}

/// `f(x) = A x + b` with `A` given as `m` rows of length `n`.
pub fn affine_solution(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<ExactSolution> {
    let m = a.len();
    let n = a.first().map(|r| r.len()).unwrap_or(0);
    if n == 0 || a.iter().any(|r| r.len() != n) || b.len() != m {
        return Err(Error::DimensionMismatch(format!("affine map needs an {m}×n matrix and offset of length {m}")));
    }
    let map = Affine::new(a, b.clone());
    let mut jac = vec![0.0; n * m];
    map.jacobian(&vec![0.0; n], &mut jac);
    let l1 = crate::metric::singular_values(&crate::stencil::Jacobian { n, m, data: jac }).largest();
    if !(l1 < 1.0) {
        return Err(Error::NotSpacelike { lambda1: l1, node: None });
    }
    Ok(ExactSolution {
        id: "affine".into(),
        form: ClosedForm::Affine { n, m, matrix: map.matrix.clone(), offset: b },
        map: Arc::new(map),
        validity: Validity::Everywhere,
    })
}

pub fn lorentzian_catenoid(c: f64) -> Result<ExactSolution> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("catenoid parameter must be positive, got {c}")));
    }
    Ok(ExactSolution {
        id: "catenoid".into(),
        map: Arc::new(Catenoid { c }),
        form: ClosedForm::Catenoid { c },
        validity: Validity::OffAxis,
    })
}

/// Random points in `domain` (rejection sampling in its bounding box).
pub fn sample_domain(domain: &ConvexDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let (lo, hi) = domain.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count && tries < 1000 * count.max(1) {
        tries += 1;
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..=*b)).collect();
        if domain.contains(&x, 0.0) {
            out.push(x);
        }
    }
    out
}

/// `f = (Re p, Im p)` for `p(z) = Σ a_k z^k`; checks `|p'| < 1` on `domain` by sampling.
pub fn holomorphic_solution(coefficients: Vec<Complex64>, domain: &ConvexDomain) -> Result<ExactSolution> {
    if domain.dim() != 2 {
        return Err(Error::DimensionMismatch("holomorphic solutions live on planar domains".into()));
    }
    let poly = HolomorphicPoly { coefficients: coefficients.clone() };
    let mut points = sample_domain(domain, 4096, 0x5eed);
    points.extend(domain.boundary_probes(64));
    let worst = points
        .iter()
        .map(|x| poly.derivative(Complex64::new(x[0], x[1])).norm())
        .fold(0.0, f64::max);
    if !(worst < 1.0) {
        return Err(Error::NotSpacelike { lambda1: worst, node: None });
    }
    Ok(ExactSolution {
        id: "holomorphic_poly".into(),
        map: Arc::new(poly),
        form: ClosedForm::Holomorphic { coefficients },
        validity: Validity::Everywhere,
    })
}

// ---------------------------------------------------------------------------
// brute-force tension

fn det_cofactor(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    match n {
        0 => 1.0,
        1 => a[0][0],
        _ => {
            let mut total = 0.0;
            for col in 0..n {
                let minor: Vec<Vec<f64>> =
                    a[1..].iter().map(|row| row.iter().enumerate().filter(|(k, _)| *k != col).map(|(_, v)| *v).collect()).collect();
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * a[0][col] * det_cofactor(&minor);
            }
            total
        }
    }
}

fn largest_eigenvalue_power(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i][j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w;
    }
    lambda
}

/// Recomputes the tension at an interior node along a separate code path:
/// neighbors found from multi-indices, differences written out, metric
/// inverted by cofactors, spacelikeness decided by leading principal minors.
pub fn brute_force_tension(f: &GraphMap, node: usize) -> Result<Vec<f64>> {
    let grid = f.grid();
    if node >= grid.node_count() || grid.class(node) == NodeClass::Exterior {
        return Err(Error::ExteriorNode(node));
    }
    if grid.class(node) != NodeClass::Interior {
        return Err(Error::InsufficientStencil(node));
    }
    let n = grid.dim();
    let m = f.codim();
    let h = grid.spacing();
    let base = grid.multi_index(node);
    let at = |offsets: &[(usize, i64)]| -> Vec<f64> {
        let mut idx: Vec<i64> = base.iter().map(|&v| v as i64).collect();
        for &(axis, d) in offsets {
            idx[axis] += d;
        }
        let idx: Vec<usize> = idx.into_iter().map(|v| v as usize).collect();
        f.value(grid.node_at(&idx).expect("stencil inside lattice")).to_vec()
    };
    let center = at(&[]);

    let mut jac = vec![vec![0.0; m]; n];
    let mut hess = vec![vec![vec![0.0; n]; n]; m];
    for i in 0..n {
        let plus = at(&[(i, 1)]);
        let minus = at(&[(i, -1)]);
        for b in 0..m {
            jac[i][b] = (plus[b] - minus[b]) / (2.0 * h);
            hess[b][i][i] = (plus[b] - 2.0 * center[b] + minus[b]) / (h * h);
        }
        for j in 0..n {
            if j == i {
                continue;
            }
            let pp = at(&[(i, 1), (j, 1)]);
            let pm = at(&[(i, 1), (j, -1)]);
            let mp = at(&[(i, -1), (j, 1)]);
            let mm = at(&[(i, -1), (j, -1)]);
            for b in 0..m {
                hess[b][i][j] = (pp[b] - pm[b] - mp[b] + mm[b]) / (4.0 * h * h);
            }
        }
    }

    let mut g = vec![vec![0.0; n]; n];
    let mut jjt = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for b in 0..m {
                s += jac[i][b] * jac[j][b];
            }
            jjt[i][j] = s;
            g[i][j] = if i == j { 1.0 - s } else { -s };
        }
    }
    // spacelike with guard: g − (1 − (1 − ε)²) I positive definite
    let margin = 1.0 - (1.0 - SPACELIKE_GUARD) * (1.0 - SPACELIKE_GUARD);
    let shifted: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { g[i][j] - margin } else { g[i][j] }).collect()).collect();
    for k in 1..=n {
        let lead: Vec<Vec<f64>> = shifted[..k].iter().map(|r| r[..k].to_vec()).collect();
        if !(det_cofactor(&lead) > 0.0) {
            let lambda1 = largest_eigenvalue_power(&jjt).sqrt();
            return Err(Error::NotSpacelike { lambda1, node: Some(node) });
        }
    }

    let det = det_cofactor(&g);
    let mut g_inv = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            // inverse = adjugate / det, adj[i][j] = cofactor of (j, i)
            let minor: Vec<Vec<f64>> = (0..n)
                .filter(|&r| r != j)
                .map(|r| (0..n).filter(|&c| c != i).map(|c| g[r][c]).collect())
                .collect();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            g_inv[i][j] = sign * det_cofactor(&minor) / det;
        }
    }

    let mut out = vec![0.0; m];
    for (b, o) in out.iter_mut().enumerate() {
        for i in 0..n {
            for j in 0..n {
                *o += g_inv[i][j] * hess[b][i][j];
            }
        }
    }
    Ok(out)
}

/// A random grid function on `[0, 1]^n` (spacing 1/4) built from a cubic
/// polynomial plus node noise, scaled so its largest discrete singular value
/// over interior nodes is uniform in `[0.1, 0.95]`.
pub fn random_spacelike_field(rng: &mut impl Rng, n: usize, m: usize) -> GraphMap {
    let domain = ConvexDomain::new_box(vec![0.0; n], vec![1.0; n]).expect("unit box");
    let grid = Arc::new(crate::lattice::build_grid(&domain, 0.25).expect("grid"));
    let mut terms = Vec::new();
    let mut exps = vec![0u32; n];
    loop {
        if exps.iter().sum::<u32>() <= 3 {
            terms.push(exps.clone());
        }
        let mut k = 0;
        while k < n {
            exps[k] += 1;
            if exps[k] <= 3 {
                break;
            }
            exps[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    let coeffs: Vec<Vec<f64>> = (0..m).map(|_| terms.iter().map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut values = vec![0.0; grid.node_count() * m];
    for node in 0..grid.node_count() {
        if grid.class(node) == NodeClass::Exterior {
            continue;
        }
        let x = grid.position(node);
        for b in 0..m {
            let mut v = 0.01 * rng.random_range(-1.0..1.0);
            for (t, c) in terms.iter().zip(&coeffs[b]) {
                v += c * t.iter().zip(&x).map(|(&e, &xi)| xi.powi(e as i32)).product::<f64>();
            }
            values[node * m + b] = v;
        }
    }
    let f = GraphMap::from_values(grid.clone(), m, values).expect("sized");
    let l1 = grid
        .interior()
        .iter()
        .map(|&k| crate::metric::singular_values(&crate::stencil::gradient_at(&f, k).expect("interior")).largest())
        .fold(0.0, f64::max);
    let target = rng.random_range(0.1..0.95);
    let scale = if l1 > 0.0 { target / l1 } else { 1.0 };
    f.combine(scale, &f, 0.0)
}

// ---------------------------------------------------------------------------
// convergence studies

/// Least-squares slope of `ln e` against `ln h`; `None` when any error is at
/// or below [`ORDER_FLOOR`] or fewer than two points are given.
pub fn fit_order(hs: &[f64], errors: &[f64]) -> Option<f64> {
    if hs.len() < 2 || hs.len() != errors.len() || errors.iter().any(|&e| !(e > ORDER_FLOOR)) {
        return None;
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OrderStudy {
    pub scenario: String,
    pub hs: Vec<f64>,
    pub errors: Vec<f64>,
    pub steps: Vec<u64>,
    pub terminations: Vec<crate::flow::Termination>,
    pub order: Option<f64>,
}

impl OrderStudy {
    pub fn all_converged(&self) -> bool {
        self.terminations.iter().all(|t| *t == crate::flow::Termination::Converged)
    }

    /// Every error at or below the floor: the scheme is exact on this solution.
    pub fn exact(&self) -> bool {
        self.all_converged() && self.errors.iter().all(|&e| e <= ORDER_FLOOR)
    }
}

/// Sup-norm error of `f` against `exact` over non-exterior nodes.
pub fn sup_error(f: &GraphMap, exact: &dyn SmoothMap) -> f64 {
    let reference = GraphMap::sample(f.grid().clone(), exact);
    f.sup_distance(&reference)
}

/// Runs the flow on `spec` at each spacing in `hs` and fits the order of the
/// converged error against the scenario's exact solution.
pub fn convergence_order(spec: &crate::scenario::ProblemSpec, hs: &[f64]) -> Result<OrderStudy> {
    if hs.len() < 3 || hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("need at least three decreasing grid spacings".into()));
    }
    let mut study = OrderStudy {
        scenario: spec.name.clone(),
        hs: hs.to_vec(),
        errors: Vec::new(),
        steps: Vec::new(),
        terminations: Vec::new(),
        order: None,
    };
    for &h in hs {
        let mut s = spec.clone();
        s.grid.h = h;
        let problem = crate::scenario::Problem::from_spec(&s)?;
        let exact = problem.exact.clone().ok_or_else(|| Error::NonOracleScenario(spec.name.clone()))?;
        let result = crate::flow::run(&problem);
        study.errors.push(sup_error(&result.state.f, exact.map.as_ref()));
        study.steps.push(result.state.step);
        study.terminations.push(result.termination);
    }
    if study.all_converged() {
        study.order = fit_order(&study.hs, &study.errors);
    }
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SmoothMapExt;
    use crate::lattice::build_grid;

    fn unit_box() -> ConvexDomain {
        ConvexDomain::new_box(vec![1.0, -0.5], vec![2.0, 0.5]).unwrap()
    }

    #[test]
    fn hyperdual_matches_known_derivatives() {
        // f = x² y + ln(x) at (2, 3)
        let x = [HyperDual { a: 2.0, b: 1.0, c: 1.0, d: 0.0 }, HyperDual::constant(3.0)];
        let f = x[0] * x[0] * x[1] + x[0].ln();
        assert_eq!(f.a, 12.0 + 2f64.ln());
        assert!((f.b - (12.0 + 0.5)).abs() < 1e-15);
        assert!((f.d - (6.0 - 0.25)).abs() < 1e-15);
        let q = HyperDual { a: 4.0, b: 1.0, c: 1.0, d: 0.0 }.sqrt();
        assert_eq!((q.a, q.b, q.d), (2.0, 0.25, -1.0 / 32.0));
        let r = HyperDual::constant(1.0) / HyperDual { a: 2.0, b: 1.0, c: 1.0, d: 0.0 };
        assert_eq!((r.a, r.b, r.d), (0.5, -0.25, 0.25));
    }

    #[test]
    fn catenoid_point_values() {
        let cat = lorentzian_catenoid(1.0).unwrap();
        let v = cat.map.value_vec(&[1.0, 0.0]);
        assert!((v[0] - 0.881_373_587_019_543).abs() < 1e-14);
        let j = cat.map.jacobian_vec(&[1.0, 0.0]);
        assert!((j[0].hypot(j[1]) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(lorentzian_catenoid(0.0).is_err());
        assert!(!cat.is_valid(&[0.0, 0.0]));
    }

    #[test]
    fn catenoid_passes_pre_use_verification() {
        let cat = lorentzian_catenoid(1.0).unwrap();
        let points = sample_domain(&unit_box(), 10_000, 1);
        let check = cat.verify(&points).unwrap();
        assert_eq!(check.samples, 10_000);
        assert!(check.passed(1e-10), "{check:?}");
        assert!(check.max_lambda1 <= std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
    }

    #[test]
    fn holomorphic_quadratic_structure() {
        let sq = ConvexDomain::new_box(vec![-0.5; 2], vec![0.5; 2]).unwrap();
        let sol = holomorphic_solution(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.15, 0.0)], &sq)
            .unwrap();
        let check = sol.verify(&sample_domain(&sq, 1000, 2)).unwrap();
        assert!(check.max_conformal_defect <= 1e-12);
        assert!(check.passed(1e-10), "{check:?}");
        assert!(check.max_lambda1 <= 0.3 * std::f64::consts::FRAC_1_SQRT_2 + 1e-12);
        // g = (1 − |p'|²) I
        let x = [0.3, -0.2];
        let j = sol.map.jacobian_vec(&x);
        let rho = 0.09 * (0.09 + 0.04);
        let g11 = 1.0 - (j[0] * j[0] + j[1] * j[1]);
        assert!((g11 - (1.0 - rho)).abs() < 1e-15);
        let steep = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)];
        assert!(matches!(holomorphic_solution(steep.to_vec(), &sq), Err(Error::NotSpacelike { .. })));
    }

    #[test]
    fn holomorphic_linear_is_affine() {
        let sq = ConvexDomain::new_box(vec![-0.5; 2], vec![0.5; 2]).unwrap();
        let a = Complex64::new(0.3, 0.4);
        let sol = holomorphic_solution(vec![Complex64::new(0.1, 0.0), a], &sq).unwrap();
        let aff = affine_solution(vec![vec![0.3, -0.4], vec![0.4, 0.3]], vec![0.1, 0.0]).unwrap();
        for x in sample_domain(&sq, 50, 3) {
            let (u, v) = (sol.map.value_vec(&x), aff.map.value_vec(&x));
            assert!((u[0] - v[0]).abs() < 1e-15 && (u[1] - v[1]).abs() < 1e-15);
            assert_eq!(sol.map.hessian_vec(&x), vec![0.0; 8]);
        }
    }

    #[test]
    fn affine_solution_checks() {
        let a = affine_solution(vec![vec![0.0, 0.0]], vec![1.0]).unwrap();
        assert!(a.verify(&[vec![0.2, 0.4]]).unwrap().passed(0.0));
        assert!(matches!(affine_solution(vec![vec![1.2, 0.0]], vec![0.0]), Err(Error::NotSpacelike { .. })));
    }

    #[test]
    fn brute_force_quadratic_example() {
        let sq = ConvexDomain::new_box(vec![-0.5; 2], vec![0.5; 2]).unwrap();
        let g = Arc::new(build_grid(&sq, 0.125).unwrap());
        let p = crate::fields::Polynomial {
            n: 2,
            components: vec![vec![
                crate::fields::Monomial { exponents: vec![2, 0], coefficient: 0.1 },
                crate::fields::Monomial { exponents: vec![0, 2], coefficient: 0.1 },
            ]],
        };
        let f = GraphMap::sample(g.clone(), &p);
        let t = brute_force_tension(&f, g.node_at(&[4, 4]).unwrap()).unwrap();
        assert!((t[0] - 0.4).abs() < 1e-14);
        let aff = GraphMap::sample(g.clone(), &Affine::new(vec![vec![0.2, 0.1]], vec![0.0]));
        for &node in g.interior() {
            assert!(brute_force_tension(&aff, node).unwrap()[0].abs() < 1e-12);
        }
        let edge = g.boundary()[0];
        assert_eq!(brute_force_tension(&f, edge).unwrap_err(), Error::InsufficientStencil(edge));
    }

    #[test]
    fn brute_force_rejects_timelike() {
        let sq = ConvexDomain::new_box(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let g = Arc::new(build_grid(&sq, 0.25).unwrap());
        let f = GraphMap::sample(g.clone(), &Affine::new(vec![vec![1.2, 0.0]], vec![0.0]));
        match brute_force_tension(&f, g.interior()[0]) {
            Err(Error::NotSpacelike { lambda1, .. }) => assert!((lambda1 - 1.2).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn order_fit() {
        let hs = [0.1, 0.05, 0.025];
        let e: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        assert!((fit_order(&hs, &e).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_order(&hs, &[1e-13, 1e-3, 1e-4]), None);
    }
}
