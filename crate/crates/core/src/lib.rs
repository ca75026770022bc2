//! Numerical solver for the Dirichlet problem of the minimal surface system
//! in pseudo-Euclidean space `R^n × R^m` with metric `ds₁² − ds₂²`.
//!
//! A spacelike graph over a convex domain is evolved by the nonparametric
//! spacelike mean curvature flow
//!
//! ```text
//! ∂f^α/∂t = g^{ij} ∂²f^α/∂x^i∂x^j,   g_ij = δ_ij − Σ_β ∂_i f^β ∂_j f^β,   f|∂Ω = ψ|∂Ω
//! ```
//!
//! until it becomes stationary. Along the way the quantities controlled by the
//! existence theory (hyperbolic angle, maximum principle, barrier functions,
//! boundary gradient bound, singular value products) are recorded so every run
//! can be audited against them.
//!
//! Module map:
//!
//! * [`lattice`]: convex domains and classified uniform grids.
//! * [`stencil`]: grid functions and second order finite differences.
//! * [`metric`]: induced metric, singular values, hyperbolic angle, tension.
//! * [`flow`]: explicit time integration with step-size control.
//! * [`analysis`]: solvability condition, barrier construction, diagnostics.
//! * [`oracles`]: exact solutions and independent recomputations.
//! * [`scenario`] and [`cli`]: scenario files, orchestration and output files.

pub mod analysis;
pub mod cli;
pub mod fields;
pub mod flow;
pub mod lattice;
pub mod linalg;
pub mod metric;
pub mod oracles;
pub mod scenario;
pub mod stencil;
pub mod verify;

pub use analysis::{ConditionReport, DiagnosticsRecord};
pub use fields::SmoothMap;
pub use flow::{FlowState, RunResult, Termination};
pub use lattice::{ConvexDomain, Grid, NodeClass};
pub use scenario::{Problem, ProblemSpec};
pub use stencil::GraphMap;

use thiserror::Error;

/// Spacelike guard: a node is accepted only while its largest singular value
/// stays below `1 - SPACELIKE_GUARD`.
pub const SPACELIKE_GUARD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid has no interior node")]
    DegenerateGrid,
    #[error("polytope is unbounded")]
    UnboundedDomain,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point is not on the domain boundary (signed distance {0:e})")]
    NotOnBoundary(f64),
    #[error("node {0} is exterior")]
    ExteriorNode(usize),
    #[error("node {0} does not have a complete stencil")]
    InsufficientStencil(usize),
    #[error("graph is not spacelike: largest singular value {lambda1} at node {node:?}")]
    NotSpacelike { lambda1: f64, node: Option<usize> },
    #[error("xi must lie in [0, 1), got {0}")]
    InvalidXi(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown catalog id `{id}` (valid ids: {})", valid.join(", "))]
    UnknownCatalogId { id: String, valid: Vec<String> },
    #[error("scenario `{0}` has no exact solution to compare against")]
    NonOracleScenario(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
