//! Scenario files: a strict JSON schema, its validation, the built-in
//! catalog, and resolution into a ready-to-run [`Problem`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fields::{Affine, Monomial, Polynomial, SineBump, SmoothMap, Sum};
use crate::flow;
use crate::lattice::{build_grid, ConvexDomain, Grid, HalfSpace, NodeClass};
use crate::oracles::{self, ExactSolution};
use crate::stencil::GraphMap;
use crate::{Error, Result};

/// Ids accepted by `{"kind": "catalog"}` boundary data.
pub const CATALOG_IDS: [&str; 4] = ["affine", "catenoid", "holomorphic_poly", "constant"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub dimensions: Dimensions,
    pub domain: DomainSpec,
    pub psi: PsiSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    pub grid: GridSpec,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Box { min: Vec<f64>, max: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Polytope { faces: Vec<FaceSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiSpec {
    /// `ψ(x) = A x + b`, `A` given as `m` rows of length `n`.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// One list of terms per component.
    Polynomial { components: Vec<Vec<TermSpec>> },
    Catalog {
        id: String,
        #[serde(default)]
        params: BTreeMap<String, serde_json::Value>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    SineBump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(rename = "type")]
    pub kind: PerturbationKind,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub safety: f64,
    pub max_steps: u64,
    pub tol_abs: f64,
    pub tol_rel: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec {
            safety: flow::DEFAULT_SAFETY,
            max_steps: flow::DEFAULT_MAX_STEPS,
            tol_abs: flow::DEFAULT_TOL_ABS,
            tol_rel: flow::DEFAULT_TOL_REL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub diagnostics_every: u64,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { diagnostics_every: flow::DEFAULT_DIAGNOSTICS_EVERY }
    }
}

// typed catalog parameters

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineParams {
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatenoidParams {
    #[serde(default = "one")]
    c: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HolomorphicParams {
    /// `[re, im]` pairs, lowest degree first.
    coefficients: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    value: Vec<f64>,
}

fn typed_params<T: serde::de::DeserializeOwned>(params: &BTreeMap<String, serde_json::Value>) -> Result<T> {
    let value = serde_json::Value::Object(params.clone().into_iter().collect());
    serde_path_to_error::deserialize(value).map_err(|e| Error::Parse {
        path: format!("psi.params.{}", e.path()),
        message: e.inner().to_string(),
    })
}

fn mismatch(msg: impl fmt::Display) -> Error {
    Error::DimensionMismatch(msg.to_string())
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(mismatch(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

fn check_matrix(matrix: &[Vec<f64>], offset: &[f64], n: usize, m: usize) -> Result<()> {
    check_len("psi matrix", matrix.len(), m)?;
    for (k, row) in matrix.iter().enumerate() {
        check_len(&format!("psi matrix row {k}"), row.len(), n)?;
    }
    check_len("psi offset", offset.len(), m)
}

impl ProblemSpec {
    /// Shape and range checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        let Dimensions { n, m } = self.dimensions;
        if n < 2 {
            return Err(mismatch(format!("domain dimension n must be at least 2, got {n}")));
        }
        if m < 1 {
            return Err(mismatch(format!("target dimension m must be at least 1, got {m}")));
        }
        match &self.domain {
            DomainSpec::Box { min, max } => {
                check_len("domain.min", min.len(), n)?;
                check_len("domain.max", max.len(), n)?;
            }
            DomainSpec::Ball { center, .. } => check_len("domain.center", center.len(), n)?,
            DomainSpec::Polytope { faces } => {
                for (k, f) in faces.iter().enumerate() {
                    check_len(&format!("domain.faces[{k}].normal"), f.normal.len(), n)?;
                }
            }
        }
        match &self.psi {
            PsiSpec::Affine { matrix, offset } => check_matrix(matrix, offset, n, m)?,
            PsiSpec::Polynomial { components } => {
                check_len("psi.components", components.len(), m)?;
                for (b, terms) in components.iter().enumerate() {
                    for (k, t) in terms.iter().enumerate() {
                        check_len(&format!("psi.components[{b}][{k}].exponents"), t.exponents.len(), n)?;
                    }
                }
            }
            PsiSpec::Catalog { id, params } => match id.as_str() {
                "affine" => {
                    let p: AffineParams = typed_params(params)?;
                    check_matrix(&p.matrix, &p.offset, n, m)?;
                }
                "catenoid" => {
                    let _: CatenoidParams = typed_params(params)?;
                    if (n, m) != (2, 1) {
                        return Err(mismatch(format!("catenoid needs n = 2, m = 1, got n = {n}, m = {m}")));
                    }
                }
                "holomorphic_poly" => {
                    let _: HolomorphicParams = typed_params(params)?;
                    if (n, m) != (2, 2) {
                        return Err(mismatch(format!("holomorphic_poly needs n = m = 2, got n = {n}, m = {m}")));
                    }
                }
                "constant" => {
                    let p: ConstantParams = typed_params(params)?;
                    check_len("psi.params.value", p.value.len(), m)?;
                }
                other => {
                    return Err(Error::UnknownCatalogId {
                        id: other.to_string(),
                        valid: CATALOG_IDS.iter().map(|s| s.to_string()).collect(),
                    })
                }
            },
        }
        if let Some(p) = &self.perturbation {
            if !p.amplitude.is_finite() {
                return Err(Error::InvalidParameter("perturbation amplitude must be finite".into()));
            }
            if !matches!(self.domain, DomainSpec::Box { .. }) {
                return Err(Error::InvalidParameter("sine_bump perturbations need a box domain".into()));
            }
        }
        if !(self.grid.h > 0.0 && self.grid.h.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid.h must be positive, got {}", self.grid.h)));
        }
        let t = &self.time;
        if !(t.safety > 0.0 && t.safety.is_finite()) {
            return Err(Error::InvalidParameter(format!("time.safety must be positive, got {}", t.safety)));
        }
        if !(t.tol_abs >= 0.0 && t.tol_rel >= 0.0) {
            return Err(Error::InvalidParameter("tolerances must be nonnegative".into()));
        }
        if self.outputs.diagnostics_every == 0 {
            return Err(Error::InvalidParameter("outputs.diagnostics_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Strict parse: unknown keys are rejected, defaults filled, shapes checked.
pub fn parse_scenario(text: &str) -> Result<ProblemSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: ProblemSpec = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

/// Pretty JSON; numbers use the shortest representation that round-trips.
pub fn emit(spec: &ProblemSpec) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("spec is serializable");
    s.push('\n');
    s
}

/// A validated scenario with its domain, grid and maps resolved.
#[derive(Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub domain: ConvexDomain,
    pub grid: Arc<Grid>,
    /// Boundary data.
    pub psi: Arc<dyn SmoothMap>,
    /// `ψ` plus the perturbation, if any.
    pub initial: Arc<dyn SmoothMap>,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem").field("spec", &self.spec).field("nodes", &self.grid.node_count()).finish()
    }
}

fn resolve_domain(spec: &DomainSpec) -> Result<ConvexDomain> {
    match spec {
        DomainSpec::Box { min, max } => ConvexDomain::new_box(min.clone(), max.clone()),
        DomainSpec::Ball { center, radius } => ConvexDomain::new_ball(center.clone(), *radius),
        DomainSpec::Polytope { faces } => ConvexDomain::new_polytope(
            faces.iter().map(|f| HalfSpace { normal: f.normal.clone(), offset: f.offset }).collect(),
        ),
    }
}

impl Problem {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Problem> {
        spec.validate()?;
        let n = spec.dimensions.n;
        let domain = resolve_domain(&spec.domain)?;
        let grid = Arc::new(build_grid(&domain, spec.grid.h)?);
        let (psi, exact): (Arc<dyn SmoothMap>, Option<ExactSolution>) = match &spec.psi {
            PsiSpec::Affine { matrix, offset } => {
                let map = Affine::new(matrix.clone(), offset.clone());
                (Arc::new(map), oracles::affine_solution(matrix.clone(), offset.clone()).ok())
            }
            PsiSpec::Polynomial { components } => {
                let components = components
                    .iter()
                    .map(|terms| {
                        terms.iter().map(|t| Monomial { exponents: t.exponents.clone(), coefficient: t.coefficient }).collect()
                    })
                    .collect();
                (Arc::new(Polynomial { n, components }), None)
            }
            PsiSpec::Catalog { id, params } => {
                let sol = match id.as_str() {
                    "affine" => {
                        let p: AffineParams = typed_params(params)?;
                        match oracles::affine_solution(p.matrix.clone(), p.offset.clone()) {
                            Ok(s) => s,
                            // timelike affine data is still a valid scenario, just not an oracle
                            Err(Error::NotSpacelike { .. }) => {
                                return Problem::assemble(spec, domain, grid, Arc::new(Affine::new(p.matrix, p.offset)), None)
                            }
                            Err(e) => return Err(e),
                        }
                    }
                    "catenoid" => oracles::lorentzian_catenoid(typed_params::<CatenoidParams>(params)?.c)?,
                    "holomorphic_poly" => {
                        let p: HolomorphicParams = typed_params(params)?;
                        let coeffs = p.coefficients.iter().map(|c| Complex64::new(c[0], c[1])).collect();
                        oracles::holomorphic_solution(coeffs, &domain)?
                    }
                    "constant" => oracles::constant_solution(n, typed_params::<ConstantParams>(params)?.value),
                    other => {
                        return Err(Error::UnknownCatalogId {
                            id: other.to_string(),
                            valid: CATALOG_IDS.iter().map(|s| s.to_string()).collect(),
                        })
                    }
                };
                (sol.map.clone(), Some(sol))
            }
        };
        Problem::assemble(spec, domain, grid, psi, exact)
    }

    fn assemble(
        spec: &ProblemSpec,
        domain: ConvexDomain,
        grid: Arc<Grid>,
        psi: Arc<dyn SmoothMap>,
        exact: Option<ExactSolution>,
    ) -> Result<Problem> {
        let initial: Arc<dyn SmoothMap> = match (&spec.perturbation, &domain) {
            (Some(p), ConvexDomain::Box { min, max }) => Arc::new(Sum {
                a: psi.clone(),
                b: Arc::new(SineBump { min: min.clone(), max: max.clone(), amplitude: p.amplitude, m: spec.dimensions.m }),
            }),
            (Some(_), _) => return Err(Error::InvalidParameter("sine_bump perturbations need a box domain".into())),
            (None, _) => psi.clone(),
        };
        Ok(Problem { spec: spec.clone(), domain, grid, psi, initial, exact })
    }

    /// Initial map on the grid: the perturbed map at interior nodes, exact
    /// boundary data at boundary nodes.
    pub fn initial_graph(&self) -> GraphMap {
        let m = self.spec.dimensions.m;
        let mut f = GraphMap::sample(self.grid.clone(), self.initial.as_ref());
        let mut x = vec![0.0; self.grid.dim()];
        for &node in self.grid.boundary() {
            self.grid.position_into(node, &mut x);
            self.psi.value(&x, &mut f.values_mut()[node * m..(node + 1) * m]);
        }
        f
    }

    /// Boundary data sampled at every non-exterior node.
    pub fn psi_graph(&self) -> GraphMap {
        GraphMap::sample(self.grid.clone(), self.psi.as_ref())
    }

    /// Whether a node carries Dirichlet data.
    pub fn is_pinned(&self, node: usize) -> bool {
        self.grid.class(node) == NodeClass::Boundary
    }
}

// ---------------------------------------------------------------------------
// catalog

fn spec(name: &str, n: usize, m: usize, domain: DomainSpec, psi: PsiSpec, h: f64) -> ProblemSpec {
    ProblemSpec {
        name: name.into(),
        dimensions: Dimensions { n, m },
        domain,
        psi,
        perturbation: None,
        grid: GridSpec { h },
        time: TimeSpec::default(),
        outputs: OutputSpec::default(),
    }
}

fn boxed(min: Vec<f64>, max: Vec<f64>) -> DomainSpec {
    DomainSpec::Box { min, max }
}

fn catalog_psi(id: &str, params: serde_json::Value) -> PsiSpec {
    let params = match params {
        serde_json::Value::Object(map) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    PsiSpec::Catalog { id: id.into(), params }
}

fn term(exponents: &[u32], coefficient: f64) -> TermSpec {
    TermSpec { exponents: exponents.to_vec(), coefficient }
}

fn bump(mut s: ProblemSpec, name: &str, amplitude: f64) -> ProblemSpec {
    s.name = name.into();
    s.perturbation = Some(PerturbationSpec { kind: PerturbationKind::SineBump, amplitude });
    s
}

/// The built-in scenarios.
pub fn catalog() -> Vec<ProblemSpec> {
    use serde_json::json;
    let unit = || boxed(vec![0.0, 0.0], vec![1.0, 1.0]);
    let centered = || boxed(vec![-0.5, -0.5], vec![0.5, 0.5]);
    let off_axis = || boxed(vec![1.0, -0.5], vec![2.0, 0.5]);
    let h = 1.0 / 40.0;

    let affine = spec("affine", 2, 1, unit(), PsiSpec::Affine { matrix: vec![vec![0.3, 0.0]], offset: vec![0.0] }, h);
    let affine_pert = bump(affine.clone(), "affine_perturbed", 0.05);
    let constant = spec("constant", 2, 2, unit(), catalog_psi("constant", json!({"value": [0.5, -0.25]})), h);
    let constant_pert = bump(constant.clone(), "constant_perturbed", 0.05);
    let catenoid = spec("catenoid", 2, 1, off_axis(), catalog_psi("catenoid", json!({"c": 1.0})), h);
    let catenoid_pert = bump(catenoid.clone(), "catenoid_perturbed", 0.05);
    let holo = spec(
        "holomorphic",
        2,
        2,
        centered(),
        catalog_psi("holomorphic_poly", json!({"coefficients": [[0.0, 0.0], [0.0, 0.0], [0.15, 0.0]]})),
        h,
    );
    let holo_pert = bump(holo.clone(), "holomorphic_perturbed", 0.05);
    let cubic = spec(
        "holomorphic_cubic",
        2,
        2,
        centered(),
        catalog_psi("holomorphic_poly", json!({"coefficients": [[0.0, 0.0], [0.1, 0.05], [0.0, 0.0], [0.2, 0.0]]})),
        h,
    );
    let cubic_pert = bump(cubic.clone(), "holomorphic_cubic_perturbed", 0.05);
    let quadratic = spec(
        "quadratic_square",
        2,
        1,
        unit(),
        PsiSpec::Polynomial { components: vec![vec![term(&[2, 0], 0.2), term(&[0, 2], 0.2)]] },
        h,
    );
    let ball = spec(
        "saddle_disc",
        2,
        1,
        DomainSpec::Ball { center: vec![0.0, 0.0], radius: 0.5 },
        PsiSpec::Polynomial { components: vec![vec![term(&[2, 0], 0.4), term(&[0, 2], -0.4), term(&[1, 1], 0.2)]] },
        h,
    );
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let triangle = spec(
        "triangle",
        2,
        2,
        DomainSpec::Polytope {
            faces: vec![
                FaceSpec { normal: vec![-1.0, 0.0], offset: 0.0 },
                FaceSpec { normal: vec![0.0, -1.0], offset: 0.0 },
                FaceSpec { normal: vec![s, s], offset: s },
            ],
        },
        PsiSpec::Polynomial {
            components: vec![vec![term(&[2, 1], 0.3), term(&[1, 0], 0.1)], vec![term(&[0, 2], 0.2), term(&[1, 1], -0.2)]],
        },
        h,
    );
    let mut cube = spec(
        "cube",
        3,
        2,
        boxed(vec![0.0; 3], vec![1.0; 3]),
        PsiSpec::Polynomial {
            components: vec![
                vec![term(&[2, 0, 0], 0.1), term(&[0, 1, 1], 0.1), term(&[0, 0, 1], 0.1)],
                vec![term(&[0, 2, 0], 0.1), term(&[1, 0, 1], -0.1)],
            ],
        },
        1.0 / 16.0,
    );
    cube.outputs.diagnostics_every = 50;
    let cube_pert = bump(cube.clone(), "cube_perturbed", 0.05);

    vec![
        affine,
        affine_pert,
        constant,
        constant_pert,
        catenoid,
        catenoid_pert,
        holo,
        holo_pert,
        cubic,
        cubic_pert,
        quadratic,
        ball,
        triangle,
        cube,
        cube_pert,
    ]
}

pub fn catalog_scenario(name: &str) -> Option<ProblemSpec> {
    catalog().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "tilt",
        "dimensions": {"n": 2, "m": 1},
        "domain": {"kind": "box", "min": [0, 0], "max": [1, 1]},
        "psi": {"kind": "affine", "matrix": [[0.3, 0.0]], "offset": [0.0]},
        "grid": {"h": 0.25}
    }"#;

    #[test]
    fn minimal_scenario_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.time, TimeSpec { safety: 0.9, max_steps: 200_000, tol_abs: 1e-8, tol_rel: 1e-6 });
        assert_eq!(s.outputs.diagnostics_every, 100);
        assert!(s.perturbation.is_none());
        let p = Problem::from_spec(&s).unwrap();
        assert!(p.exact.is_some());
        assert_eq!(p.grid.interior().len(), 9);
    }

    #[test]
    fn dimension_one_is_rejected() {
        let text = MINIMAL.replace(r#""n": 2"#, r#""n": 1"#);
        assert!(matches!(parse_scenario(&text), Err(Error::DimensionMismatch(_))));
        let text = MINIMAL.replace("[[0.3, 0.0]]", "[[0.3, 0.0, 1.0]]");
        assert!(matches!(parse_scenario(&text), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn unknown_catalog_id_lists_valid_ids() {
        let text = MINIMAL.replace(
            r#"{"kind": "affine", "matrix": [[0.3, 0.0]], "offset": [0.0]}"#,
            r#"{"kind": "catalog", "id": "catenoidd"}"#,
        );
        match parse_scenario(&text) {
            Err(Error::UnknownCatalogId { id, valid }) => {
                assert_eq!(id, "catenoidd");
                assert_eq!(valid, CATALOG_IDS.to_vec());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_path() {
        let text = MINIMAL.replace(r#""grid": {"h": 0.25}"#, r#""grid": {"h": 0.25, "spacing": 1}"#);
        match parse_scenario(&text) {
            Err(Error::Parse { path, message }) => {
                assert_eq!(path, "grid.spacing");
                assert!(message.contains("spacing"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace(r#""grid": {"h": 0.25}"#, r#""grid": {"h": 0.25}, "extra": 1"#);
        assert!(matches!(parse_scenario(&text), Err(Error::Parse { .. })));
        let text = MINIMAL.replace(r#""offset": [0.0]}"#, r#""offset": [0.0], "scale": 2}"#);
        assert!(matches!(parse_scenario(&text), Err(Error::Parse { .. })));
        let text = MINIMAL.replace(r#""grid": {"h": 0.25}"#, r#""grid": {"h": 0.25}, "time": {"safety": 0.5, "dt": 1}"#);
        match parse_scenario(&text) {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "time.dt"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn catalog_params_are_checked() {
        let text = MINIMAL.replace(
            r#"{"kind": "affine", "matrix": [[0.3, 0.0]], "offset": [0.0]}"#,
            r#"{"kind": "catalog", "id": "catenoid", "params": {"radius": 2}}"#,
        );
        match parse_scenario(&text) {
            Err(Error::Parse { path, .. }) => assert!(path.starts_with("psi.params"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn catalog_round_trips() {
        for s in catalog() {
            let text = emit(&s);
            assert_eq!(parse_scenario(&text).unwrap(), s, "{}", s.name);
        }
    }

    #[test]
    fn catalog_resolves() {
        for s in catalog() {
            let p = Problem::from_spec(&s).unwrap_or_else(|e| panic!("{}: {e}", s.name));
            assert_eq!(p.psi.dim(), s.dimensions.n);
            assert_eq!(p.psi.codim(), s.dimensions.m);
            let f = p.initial_graph();
            let psi = p.psi_graph();
            for &b in p.grid.boundary() {
                assert_eq!(f.value(b), psi.value(b), "{}", s.name);
            }
        }
    }

    #[test]
    fn perturbation_needs_a_box() {
        let mut s = catalog_scenario("saddle_disc").unwrap();
        s.perturbation = Some(PerturbationSpec { kind: PerturbationKind::SineBump, amplitude: 0.01 });
        assert!(matches!(s.validate(), Err(Error::InvalidParameter(_))));
    }
}
