//! Closed-form maps `R^n -> R^m` with analytic first and second derivatives.
//!
//! These supply boundary data `ψ`, initial maps, perturbations and exact
//! solutions. Layout conventions match the stencil module: a Jacobian is a
//! row-major `n × m` block with entry `(i, β) = ∂f^β/∂x^i`, a Hessian stack is
//! `m` consecutive row-major `n × n` blocks.

use std::fmt;
use std::sync::Arc;

pub trait SmoothMap: Send + Sync + fmt::Debug {
    /// Domain dimension `n`.
    fn dim(&self) -> usize;
    /// Target dimension `m`.
    fn codim(&self) -> usize;
    fn value(&self, x: &[f64], out: &mut [f64]);
    fn jacobian(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

/// Owned evaluation helpers on top of [`SmoothMap`].
pub trait SmoothMapExt: SmoothMap {
    fn value_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.codim()];
        self.value(x, &mut v);
        v
    }

    fn jacobian_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim() * self.codim()];
        self.jacobian(x, &mut v);
        v
    }

    fn hessian_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut v = vec![0.0; self.codim() * n * n];
        self.hessian(x, &mut v);
        v
    }
}

impl<T: SmoothMap + ?Sized> SmoothMapExt for T {}

#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    pub n: usize,
    pub value: Vec<f64>,
}

impl SmoothMap for Constant {
    fn dim(&self) -> usize {
        self.n
    }
    fn codim(&self) -> usize {
        self.value.len()
    }
    fn value(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.value);
    }
    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// `f(x) = A x + b` with `A` given row-major as `m × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub n: usize,
    pub m: usize,
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Affine {
    pub fn new(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Self {
        let m = matrix.len();
        let n = matrix.first().map(|r| r.len()).unwrap_or(0);
        Affine { n, m, matrix: matrix.concat(), offset }
    }
}

impl SmoothMap for Affine {
    fn dim(&self) -> usize {
        self.n
    }
    fn codim(&self) -> usize {
        self.m
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        for b in 0..self.m {
            let row = &self.matrix[b * self.n..(b + 1) * self.n];
            out[b] = self.offset[b] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        }
    }
    fn jacobian(&self, _x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            for b in 0..self.m {
                out[i * self.m + b] = self.matrix[b * self.n + i];
            }
        }
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

/// Per-component sums of monomials.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub n: usize,
    pub components: Vec<Vec<Monomial>>,
}

fn pow(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl SmoothMap for Polynomial {
    fn dim(&self) -> usize {
        self.n
    }
    fn codim(&self) -> usize {
        self.components.len()
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        for (b, terms) in self.components.iter().enumerate() {
            out[b] = terms
                .iter()
                .map(|t| t.coefficient * t.exponents.iter().zip(x).map(|(&e, &v)| pow(v, e)).product::<f64>())
                .sum();
        }
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let m = self.codim();
        out.fill(0.0);
        for (b, terms) in self.components.iter().enumerate() {
            for t in terms {
                for i in 0..self.n {
                    let ei = t.exponents[i];
                    if ei == 0 {
                        continue;
                    }
                    let mut p = t.coefficient * ei as f64;
                    for k in 0..self.n {
                        p *= if k == i { pow(x[k], ei - 1) } else { pow(x[k], t.exponents[k]) };
                    }
                    out[i * m + b] += p;
                }
            }
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.fill(0.0);
        for (b, terms) in self.components.iter().enumerate() {
            for t in terms {
                for i in 0..n {
                    for j in i..n {
                        let mut e = t.exponents.clone();
                        let mut c = t.coefficient;
                        for &axis in &[i, j] {
                            if e[axis] == 0 {
                                c = 0.0;
                                break;
                            }
                            c *= e[axis] as f64;
                            e[axis] -= 1;
                        }
                        if c == 0.0 {
                            continue;
                        }
                        let p: f64 = c * e.iter().zip(x).map(|(&ek, &v)| pow(v, ek)).product::<f64>();
                        out[b * n * n + i * n + j] += p;
                        if i != j {
                            out[b * n * n + j * n + i] += p;
                        }
                    }
                }
            }
        }
    }
}

/// `A ∏_k sin(π (x_k − min_k) / (max_k − min_k))` in every component; vanishes
/// on the faces of the box `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineBump {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub amplitude: f64,
    pub m: usize,
}

impl SineBump {
    fn factors(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.min.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut w = vec![0.0; n];
        for k in 0..n {
            w[k] = std::f64::consts::PI / (self.max[k] - self.min[k]);
            let a = w[k] * (x[k] - self.min[k]);
            s[k] = a.sin();
            c[k] = a.cos();
        }
        (s, c, w)
    }
}

impl SmoothMap for SineBump {
    fn dim(&self) -> usize {
        self.min.len()
    }
    fn codim(&self) -> usize {
        self.m
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        let (s, _, _) = self.factors(x);
        out.fill(self.amplitude * s.iter().product::<f64>());
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let (s, c, w) = self.factors(x);
        for i in 0..n {
            let mut d = self.amplitude * w[i] * c[i];
            for k in 0..n {
                if k != i {
                    d *= s[k];
                }
            }
            for b in 0..self.m {
                out[i * self.m + b] = d;
            }
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        let (s, c, w) = self.factors(x);
        for i in 0..n {
            for j in 0..n {
                let mut d = self.amplitude;
                for k in 0..n {
                    d *= if k == i && k == j {
                        -w[k] * w[k] * s[k]
                    } else if k == i || k == j {
                        w[k] * c[k]
                    } else {
                        s[k]
                    };
                }
                for b in 0..self.m {
                    out[b * n * n + i * n + j] = d;
                }
            }
        }
    }
}

/// Pointwise sum of two maps with equal shapes.
#[derive(Debug, Clone)]
pub struct Sum {
    pub a: Arc<dyn SmoothMap>,
    pub b: Arc<dyn SmoothMap>,
}

impl SmoothMap for Sum {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn codim(&self) -> usize {
        self.a.codim()
    }
    fn value(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        self.a.value(x, out);
        self.b.value(x, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }
    fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        self.a.jacobian(x, out);
        self.b.jacobian(x, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        self.a.hessian(x, out);
        self.b.hessian(x, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }
}
