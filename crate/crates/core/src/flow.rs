//! Explicit time integration of the nonparametric spacelike mean curvature flow
//! `∂f/∂t = g^{ij} ∂ᵢ∂ⱼf` with the boundary values held fixed.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{DiagnosticsRecord, Monitor};
use crate::metric::{evaluate_node, NodeScratch};
use crate::scenario::Problem;
use crate::stencil::GraphMap;
use crate::{Error, Result, SPACELIKE_GUARD};

/// Default controls, used when a scenario omits them.
pub const DEFAULT_SAFETY: f64 = 0.9;
pub const DEFAULT_MAX_STEPS: u64 = 200_000;
pub const DEFAULT_TOL_ABS: f64 = 1e-8;
pub const DEFAULT_TOL_REL: f64 = 1e-6;
pub const DEFAULT_DIAGNOSTICS_EVERY: u64 = 100;

/// The evolving graph together with per-node geometry at the current time.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub step: u64,
    pub f: GraphMap,
    /// Singular values per interior slot, `n` each, non-increasing.
    pub spectra: Vec<f64>,
    pub cosh_theta: Vec<f64>,
    /// Flow velocity per interior slot, `m` each.
    pub tension: Vec<f64>,
    /// Largest singular value over interior nodes.
    pub sup_df: f64,
    /// Largest node-wise Euclidean norm of the tension.
    pub residual_sup: f64,
    pub max_cosh_theta: f64,
}

/// Why a state could not be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Failure {
    NotSpacelike { node: usize, lambda1: f64 },
    NonFinite,
}

impl From<Failure> for Error {
    fn from(f: Failure) -> Self {
        match f {
            Failure::NotSpacelike { node, lambda1 } => Error::NotSpacelike { lambda1, node: Some(node) },
            Failure::NonFinite => Error::NonFinite,
        }
    }
}

impl FlowState {
    /// Evaluates geometry and tension of `f` at every interior node. A
    /// failing state is still returned (with NaN caches at offending nodes)
    /// so it can be reported.
    pub fn evaluate(f: GraphMap, t: f64, step: u64) -> (FlowState, Option<Failure>) {
        let grid = f.grid().clone();
        let n = grid.dim();
        let m = f.codim();
        let count = grid.interior().len();
        let mut spectra = vec![0.0; count * n];
        let mut tension = vec![0.0; count * m];
        let mut cosh_theta = vec![0.0; count];
        let values = f.values();
        spectra
            .par_chunks_mut(n)
            .zip(tension.par_chunks_mut(m))
            .zip(cosh_theta.par_iter_mut())
            .enumerate()
            .with_min_len(128)
            .for_each_init(
                || NodeScratch::new(n, m),
                |scratch, (slot, ((sp, te), ch))| match evaluate_node(&grid, values, slot, scratch, sp, te) {
                    Ok(c) => *ch = c,
                    Err(_) => {
                        *ch = f64::NAN;
                        te.fill(f64::NAN);
                    }
                },
            );

        let mut failure = None;
        if !f.is_finite() {
            failure = Some(Failure::NonFinite);
        }
        let mut sup_df = 0.0f64;
        let mut residual_sup = 0.0f64;
        let mut max_cosh = 1.0f64;
        for slot in 0..count {
            let l1 = spectra[slot * n];
            let te = &tension[slot * m..(slot + 1) * m];
            let ch = cosh_theta[slot];
            if failure.is_none() {
                if l1.is_nan() || te.iter().any(|v| v.is_infinite()) {
                    failure = Some(Failure::NonFinite);
                } else if !ch.is_finite() {
                    failure = Some(Failure::NotSpacelike { node: grid.interior()[slot], lambda1: l1 });
                }
            }
            sup_df = sup_df.max(l1);
            residual_sup = residual_sup.max(te.iter().map(|v| v * v).sum::<f64>().sqrt());
            max_cosh = max_cosh.max(ch);
        }
        if failure.is_some() && !residual_sup.is_finite() {
            residual_sup = f64::NAN;
        }
        let state =
            FlowState { t, step, f, spectra, cosh_theta, tension, sup_df, residual_sup, max_cosh_theta: max_cosh };
        (state, failure)
    }

    /// Evaluates `f`, failing on loss of spacelikeness or non-finite values.
    pub fn new(f: GraphMap) -> Result<FlowState> {
        match FlowState::evaluate(f, 0.0, 0) {
            (state, None) => Ok(state),
            (_, Some(fail)) => Err(fail.into()),
        }
    }

    pub fn dim(&self) -> usize {
        self.f.grid().dim()
    }

    /// Singular values at an interior slot.
    pub fn spectrum(&self, slot: usize) -> &[f64] {
        let n = self.dim();
        &self.spectra[slot * n..(slot + 1) * n]
    }
}

/// Stable explicit step `safety · h² (1 − sup_df²) / (2n)`.
pub fn cfl_dt(state: &FlowState, safety: f64) -> Result<f64> {
    if !(safety > 0.0 && safety.is_finite()) {
        return Err(Error::InvalidParameter(format!("safety factor must be positive, got {safety}")));
    }
    if !(state.sup_df < 1.0 - SPACELIKE_GUARD) {
        return Err(Error::NotSpacelike { lambda1: state.sup_df, node: None });
    }
    let h = state.f.grid().spacing();
    let n = state.dim() as f64;
    Ok(safety * h * h * (1.0 - state.sup_df * state.sup_df) / (2.0 * n))
}

fn advance(state: &FlowState, dt: f64) -> (FlowState, Option<Failure>) {
    let grid = state.f.grid();
    let m = state.f.codim();
    // boundary nodes keep their pinned values; only interior nodes move
    let mut next = state.f.clone();
    let values = next.values_mut();
    for (slot, &node) in grid.interior().iter().enumerate() {
        let v = &mut values[node * m..(node + 1) * m];
        let te = &state.tension[slot * m..(slot + 1) * m];
        for (x, t) in v.iter_mut().zip(te) {
            *x += dt * t;
        }
    }
    FlowState::evaluate(next, state.t + dt, state.step + 1)
}

/// One forward Euler step of size `dt`.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    match advance(state, dt) {
        (next, None) => Ok(next),
        (_, Some(fail)) => Err(fail.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    Converged,
    MaxSteps,
    SpacelikeLost,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Last successfully evaluated state (the initial state if evaluation failed at once).
    pub state: FlowState,
    pub termination: Termination,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub failure: Option<Failure>,
    pub initial_residual: f64,
    /// Safety factor in use at termination.
    pub safety: f64,
    /// Largest `|Df|²` seen so far, interior and measured boundary values.
    pub xi: f64,
}

/// Runs the flow from the problem's initial map until the residual drops
/// below `max(tol_abs, tol_rel · initial residual)` or the step limit is hit.
///
/// If a step loses spacelikeness the safety factor is halved once and the
/// step retried from the last good state; a second loss ends the run.
pub fn run(problem: &Problem) -> RunResult {
    let controls = &problem.spec.time;
    let every = problem.spec.outputs.diagnostics_every.max(1);
    let monitor = Monitor::new(problem);
    let mut safety = controls.safety;
    let mut retried = false;

    let (mut state, fail) = FlowState::evaluate(problem.initial_graph(), 0.0, 0);
    let mut xi = state.sup_df * state.sup_df;
    let mut diagnostics = Vec::new();
    let initial_residual = state.residual_sup;

    let emit = |state: &FlowState, safety: f64, xi: &mut f64, out: &mut Vec<DiagnosticsRecord>| {
        let boundary = monitor.measured_boundary_gradient(&state.f);
        *xi = xi.max(boundary * boundary);
        let dt = cfl_dt(state, safety).unwrap_or(f64::NAN);
        out.push(monitor.record(state, dt, *xi, boundary));
    };

    if let Some(fail) = fail {
        emit(&state, safety, &mut xi, &mut diagnostics);
        let termination = match fail {
            Failure::NotSpacelike { .. } => Termination::SpacelikeLost,
            Failure::NonFinite => Termination::NonFinite,
        };
        return RunResult { state, termination, diagnostics, failure: Some(fail), initial_residual, safety, xi };
    }

    let target = controls.tol_abs.max(controls.tol_rel * initial_residual);
    emit(&state, safety, &mut xi, &mut diagnostics);
    let mut failure = None;
    let termination = loop {
        if state.residual_sup <= target {
            break Termination::Converged;
        }
        if state.step >= controls.max_steps {
            break Termination::MaxSteps;
        }
        let dt = match cfl_dt(&state, safety) {
            Ok(dt) => dt,
            Err(_) => break Termination::SpacelikeLost,
        };
        match advance(&state, dt) {
            (next, None) => state = next,
            (_, Some(fail @ Failure::NotSpacelike { .. })) => {
                if retried {
                    failure = Some(fail);
                    break Termination::SpacelikeLost;
                }
                retried = true;
                safety *= 0.5;
                continue;
            }
            (_, Some(fail)) => {
                failure = Some(fail);
                break Termination::NonFinite;
            }
        }
        xi = xi.max(state.sup_df * state.sup_df);
        if state.step % every == 0 {
            emit(&state, safety, &mut xi, &mut diagnostics);
        }
    };
    if diagnostics.last().map(|r| r.step) != Some(state.step) {
        emit(&state, safety, &mut xi, &mut diagnostics);
    }
    RunResult { state, termination, diagnostics, failure, initial_residual, safety, xi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Affine, Constant, Monomial, Polynomial};
    use crate::lattice::{build_grid, ConvexDomain};
    use std::sync::Arc;

    fn square(h: f64) -> Arc<crate::lattice::Grid> {
        Arc::new(build_grid(&ConvexDomain::new_box(vec![0.0; 2], vec![1.0; 2]).unwrap(), h).unwrap())
    }

    #[test]
    fn cfl_examples() {
        let g = square(0.1);
        let s = FlowState::new(GraphMap::sample(g.clone(), &Constant { n: 2, value: vec![0.0] })).unwrap();
        assert!((cfl_dt(&s, 1.0).unwrap() - 0.0025).abs() < 1e-18);
        let a = 0.5f64.sqrt();
        let s = FlowState::new(GraphMap::sample(g, &Affine::new(vec![vec![a, 0.0]], vec![0.0]))).unwrap();
        assert!((s.sup_df * s.sup_df - 0.5).abs() < 1e-12);
        assert!((cfl_dt(&s, 0.9).unwrap() - 0.001125).abs() < 1e-14);
        assert!(cfl_dt(&s, 0.0).is_err());
    }

    #[test]
    fn affine_is_stationary() {
        let g = square(0.1);
        let f = GraphMap::sample(g, &Affine::new(vec![vec![0.3, -0.2], vec![0.1, 0.4]], vec![1.0, 0.0]));
        let s = FlowState::new(f.clone()).unwrap();
        assert!(s.residual_sup <= 1e-12);
        let next = step(&s, cfl_dt(&s, 0.9).unwrap()).unwrap();
        assert!(next.f.sup_distance(&f) <= 1e-14);
        assert!(next.t > 0.0 && next.step == 1);
    }

    #[test]
    fn constant_fixed_point() {
        let g = square(0.25);
        let f = GraphMap::sample(g, &Constant { n: 2, value: vec![2.0, -1.0] });
        let s = FlowState::new(f.clone()).unwrap();
        assert_eq!(s.residual_sup, 0.0);
        let next = step(&s, 0.01).unwrap();
        assert_eq!(next.f.values(), f.values());
    }

    #[test]
    fn quadratic_step_at_critical_point() {
        let g = Arc::new(build_grid(&ConvexDomain::new_box(vec![-0.5; 2], vec![0.5; 2]).unwrap(), 0.125).unwrap());
        let p = Polynomial {
            n: 2,
            components: vec![vec![
                Monomial { exponents: vec![2, 0], coefficient: 0.1 },
                Monomial { exponents: vec![0, 2], coefficient: 0.1 },
            ]],
        };
        let f = GraphMap::sample(g.clone(), &p);
        let s = FlowState::new(f.clone()).unwrap();
        let dt = 1e-3;
        let next = step(&s, dt).unwrap();
        let node = g.node_at(&[4, 4]).unwrap();
        assert!((next.f.value(node)[0] - f.value(node)[0] - dt * 0.4).abs() < 1e-15);
        // boundary untouched
        for &b in g.boundary() {
            assert_eq!(next.f.value(b), f.value(b));
        }
    }

    #[test]
    fn timelike_data_is_reported() {
        let g = square(0.25);
        let f = GraphMap::sample(g.clone(), &Affine::new(vec![vec![1.2, 0.0]], vec![0.0]));
        let (_, fail) = FlowState::evaluate(f.clone(), 0.0, 0);
        match fail {
            Some(Failure::NotSpacelike { node, lambda1 }) => {
                assert_eq!(node, g.interior()[0]);
                assert!((lambda1 - 1.2).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(FlowState::new(f), Err(Error::NotSpacelike { node: Some(_), .. })));
    }

    #[test]
    fn non_finite_values_are_detected() {
        let g = square(0.25);
        let mut f = GraphMap::sample(g.clone(), &Constant { n: 2, value: vec![0.0] });
        let node = g.interior()[4];
        f.values_mut()[node] = f64::NAN;
        assert_eq!(FlowState::evaluate(f, 0.0, 0).1, Some(Failure::NonFinite));
    }

    #[test]
    fn evaluation_is_independent_of_worker_count() {
        let g = square(1.0 / 32.0);
        let p = Polynomial {
            n: 2,
            components: vec![
                vec![Monomial { exponents: vec![2, 1], coefficient: 0.3 }],
                vec![Monomial { exponents: vec![0, 3], coefficient: -0.2 }, Monomial { exponents: vec![1, 0], coefficient: 0.1 }],
            ],
        };
        let f = GraphMap::sample(g, &p);
        let eval = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| FlowState::evaluate(f.clone(), 0.0, 0).0)
        };
        let (a, b) = (eval(1), eval(4));
        assert_eq!(a.tension, b.tension);
        assert_eq!(a.spectra, b.spectra);
        assert_eq!(a.residual_sup.to_bits(), b.residual_sup.to_bits());
    }
}
