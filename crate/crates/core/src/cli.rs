//! Command implementations behind the binary. Each returns a process exit code.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde_json::json;

use crate::analysis::{self, DiagnosticsRecord};
use crate::flow::{self, Failure, Termination};
use crate::lattice::NodeClass;
use crate::oracles;
use crate::scenario::{self, Problem, ProblemSpec};
use crate::stencil::GraphMap;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CONDITION_FAILS: i32 = 2;
pub const EXIT_NOT_SPACELIKE: i32 = 3;
pub const EXIT_MAX_STEPS: i32 = 4;
pub const EXIT_SPACELIKE_LOST: i32 = 5;
pub const EXIT_NON_FINITE: i32 = 6;
pub const EXIT_ORDER_OUT_OF_RANGE: i32 = 7;

/// Accepted fitted orders for `order`.
pub const ORDER_RANGE: (f64, f64) = (1.7, 2.3);

pub const DIAGNOSTICS_HEADER: &str = "step,t,dt,residual_sup,max_cosh_theta,sup_df,max_principle_margin,boundary_grad_margin,barrier_margin,product_bound_margin";

/// Reads a scenario file, or falls back to a catalog scenario of that name.
pub fn load_scenario(arg: &str) -> Result<ProblemSpec> {
    let path = Path::new(arg);
    if path.exists() {
        return scenario::parse_scenario(&std::fs::read_to_string(path)?);
    }
    scenario::catalog_scenario(arg)
        .ok_or_else(|| Error::Io(format!("{arg}: no such file and no catalog scenario with that name")))
}

/// Runs `f` on a pool of `workers` threads (all cores when `None`).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(pool.install(f))
}

/// Shortest round-trip decimal form; `NaN`, `inf`, `-inf` otherwise.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        ryu::Buffer::new().format_finite(v).to_string()
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in records {
        let fields = [
            r.t,
            r.dt,
            r.residual_sup,
            r.max_cosh_theta,
            r.sup_df,
            r.max_principle_margin,
            r.boundary_grad_margin,
            r.barrier_margin,
            r.product_bound_margin,
        ];
        let _ = write!(out, "{}", r.step);
        for v in fields {
            out.push(',');
            out.push_str(&format_number(v));
        }
        out.push('\n');
    }
    out
}

/// One row per non-exterior node in lexicographic multi-index order.
pub fn solution_csv(f: &GraphMap) -> String {
    let grid = f.grid();
    let n = grid.dim();
    let m = f.codim();
    let mut out = String::new();
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).chain((1..=m).map(|b| format!("f{b}"))).collect();
    out.push_str(&header.join(","));
    out.push_str(",class\n");
    let mut x = vec![0.0; n];
    for node in 0..grid.node_count() {
        let class = match grid.class(node) {
            NodeClass::Interior => "I",
            NodeClass::Boundary => "B",
            NodeClass::Exterior => continue,
        };
        grid.position_into(node, &mut x);
        for v in x.iter().chain(f.value(node)) {
            out.push_str(&format_number(*v));
            out.push(',');
        }
        out.push_str(class);
        out.push('\n');
    }
    out
}

fn fail(out: &mut dyn Write, err: &Error) -> i32 {
    let _ = writeln!(out, "error: {err}");
    EXIT_ERROR
}

/// Prints the solvability report; exit 0 if satisfied, 2 if not, 3 if `ψ` is not spacelike.
pub fn cmd_check(spec: &ProblemSpec, out: &mut dyn Write) -> i32 {
    let problem = match Problem::from_spec(spec) {
        Ok(p) => p,
        Err(e) => return fail(out, &e),
    };
    match analysis::check_condition(&problem) {
        Ok(report) => {
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("serializable"));
            if report.satisfied {
                EXIT_OK
            } else {
                EXIT_CONDITION_FAILS
            }
        }
        Err(Error::NotSpacelike { lambda1, .. }) => {
            let doc = json!({
                "scenario": spec.name,
                "spacelike": false,
                "largest_singular_value": lambda1,
                "note": "the initial graph is not spacelike; the condition does not apply",
            });
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
            EXIT_NOT_SPACELIKE
        }
        Err(e) => fail(out, &e),
    }
}

fn termination_code(t: Termination) -> i32 {
    match t {
        Termination::Converged => EXIT_OK,
        Termination::MaxSteps => EXIT_MAX_STEPS,
        Termination::SpacelikeLost => EXIT_SPACELIKE_LOST,
        Termination::NonFinite => EXIT_NON_FINITE,
    }
}

/// Runs the flow and writes `diagnostics.csv`, `solution.csv` and `report.json` to `out_dir`.
pub fn cmd_solve(spec: &ProblemSpec, out_dir: &Path, workers: Option<usize>, out: &mut dyn Write) -> i32 {
    let problem = match Problem::from_spec(spec) {
        Ok(p) => p,
        Err(e) => return fail(out, &e),
    };
    let start = Instant::now();
    let result = match with_workers(workers, || flow::run(&problem)) {
        Ok(r) => r,
        Err(e) => return fail(out, &e),
    };
    let elapsed = start.elapsed().as_secs_f64();

    let condition = analysis::check_condition(&problem);
    let final_error = problem.exact.as_ref().map(|e| oracles::sup_error(&result.state.f, e.map.as_ref()));
    let failure = result.failure.map(|f| match f {
        Failure::NotSpacelike { node, lambda1 } => json!({
            "kind": "not_spacelike",
            "node": node,
            "index": problem.grid.multi_index(node),
            "position": problem.grid.position(node),
            "largest_singular_value": lambda1,
        }),
        Failure::NonFinite => json!({"kind": "non_finite"}),
    });
    let report = json!({
        "scenario": spec.name,
        "termination": result.termination,
        "steps": result.state.step,
        "t": result.state.t,
        "initial_residual": result.initial_residual,
        "residual_sup": result.state.residual_sup,
        "sup_df": result.state.sup_df,
        "max_cosh_theta": result.state.max_cosh_theta,
        "xi": result.xi,
        "safety": result.safety,
        "condition": condition.as_ref().ok(),
        "condition_error": condition.as_ref().err().map(|e| e.to_string()),
        "final_error": final_error,
        "failure": failure,
        "elapsed_seconds": elapsed,
        "workers": workers.unwrap_or_else(rayon::current_num_threads),
    });

    let written = (|| -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(out_dir.join("diagnostics.csv"), diagnostics_csv(&result.diagnostics))?;
        std::fs::write(out_dir.join("solution.csv"), solution_csv(&result.state.f))?;
        let mut text = serde_json::to_string_pretty(&report).expect("serializable");
        text.push('\n');
        std::fs::write(out_dir.join("report.json"), text)?;
        Ok(())
    })();
    if let Err(e) = written {
        return fail(out, &e);
    }
    let _ = writeln!(
        out,
        "{}: {:?} after {} steps (t = {}, residual {})",
        spec.name,
        result.termination,
        result.state.step,
        format_number(result.state.t),
        format_number(result.state.residual_sup)
    );
    if let Some(e) = final_error {
        let _ = writeln!(out, "sup error vs exact solution: {}", format_number(e));
    }
    if let Some(Failure::NotSpacelike { node, lambda1 }) = result.failure {
        let _ = writeln!(out, "not spacelike at node {node} {:?}: largest singular value {lambda1}", problem.grid.position(node));
    }
    termination_code(result.termination)
}

/// Parses `0.05,1/40,0.0125`.
pub fn parse_h_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let bad = || Error::InvalidParameter(format!("bad grid spacing `{tok}`"));
            match tok.split_once('/') {
                Some((a, b)) => {
                    let a: f64 = a.trim().parse().map_err(|_| bad())?;
                    let b: f64 = b.trim().parse().map_err(|_| bad())?;
                    Ok(a / b)
                }
                None => tok.parse().map_err(|_| bad()),
            }
        })
        .collect()
}

/// Convergence study; exit 0 if the fitted order lies in [`ORDER_RANGE`]
/// (or every error is at rounding level), 7 otherwise.
pub fn cmd_order(spec: &ProblemSpec, hs: &[f64], workers: Option<usize>, out: &mut dyn Write) -> i32 {
    if Problem::from_spec(spec).map(|p| p.exact.is_none()).unwrap_or(false) {
        return fail(out, &Error::NonOracleScenario(spec.name.clone()));
    }
    let study = match with_workers(workers, || oracles::convergence_order(spec, hs)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) | Err(e) => return fail(out, &e),
    };
    let _ = writeln!(out, "h,error,steps,termination");
    for k in 0..study.hs.len() {
        let _ = writeln!(
            out,
            "{},{},{},{:?}",
            format_number(study.hs[k]),
            format_number(study.errors[k]),
            study.steps[k],
            study.terminations[k]
        );
    }
    if !study.all_converged() {
        let _ = writeln!(out, "order not fitted: not every run converged");
        return EXIT_ORDER_OUT_OF_RANGE;
    }
    match study.order {
        Some(p) => {
            let _ = writeln!(out, "fitted order {}", format_number(p));
            if (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&p) {
                EXIT_OK
            } else {
                EXIT_ORDER_OUT_OF_RANGE
            }
        }
        None if study.exact() => {
            let _ = writeln!(out, "errors at rounding level for every h; order fit skipped");
            EXIT_OK
        }
        None => {
            let _ = writeln!(out, "order not fitted: some errors at rounding level");
            EXIT_ORDER_OUT_OF_RANGE
        }
    }
}

/// Runs the invariant and oracle suites; exit 0 when all pass.
pub fn cmd_verify(out: &mut dyn Write) -> i32 {
    let checks = crate::verify::run_all();
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        let _ = writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_ERROR
    }
}
