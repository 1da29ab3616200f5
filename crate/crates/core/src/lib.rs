//! Bipotential framework for implicit standard materials.
//!
//! Convex-analysis primitives, bipotentials and syncs as first-class values,
//! the non-associated Drücker-Prager constitutive pair, the time-discretized
//! quasistatic evolution problem, and the alternating variational solver —
//! verifiable at desk scale through property tests and independent oracles.
//!
//! Module map:
//! - [`tensor`]: symmetric tensors, hydro/dev decompositions, duality products
//! - [`convex`]: extended reals, cones, projections, prox, inf-convolution
//! - [`bipotential`]: bipotentials, syncs, BB-graphs, the axiom auditor
//! - [`materials`]: elasticity and Drücker-Prager bipotentials, flow rule
//! - [`timestepping`]: b_{p,k}, Δb_k with split/gradient/tangent, homogenization
//! - [`discretization`]: material-point driver and plane-strain quad mesh
//! - [`solver`]: alternating algorithm, weak verifier, evolution loop
//! - [`sampling`]: seeded samplers for audits and tests

// negated comparisons are deliberate NaN guards; indexed loops mirror the
// element-assembly math; closure fields on sampler structs are the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::type_complexity)]

pub mod bipotential;
pub mod convex;
pub mod discretization;
pub mod materials;
pub mod sampling;
pub mod solver;
pub mod tensor;
pub mod timestepping;

use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value is +infinity: {context}")]
    InfiniteValue { context: &'static str },

    #[error("inf-convolution operands outside the supported family \
             (one side must be a point indicator or a strongly convex quadratic; \
             two positively homogeneous operands may be unbounded below)")]
    InfConvolutionOutsideFamily,

    #[error("supplied Fenchel conjugate fails the grid audit: {detail}")]
    ConjugateMismatch { detail: String },

    #[error("map rejected: {0}")]
    SingularMap(String),

    #[error("lift field is not admissible (residual {residual:.3e})")]
    LiftInadmissible { residual: f64 },

    #[error("element {element} has a nonpositive Jacobian")]
    DegenerateElement { element: usize },

    #[error("failure at quadrature point {point}: {source}")]
    PointFailure {
        point: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("line search could not reduce the objective")]
    LineSearchFailure,

    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

pub use bipotential::{
    axiom_audit, b_infinity, bipotential_from_sync, graph_membership, separable,
    sync_from_bipotential, transform_sync, AuditCounts, AuditReport, AuditSampler, BBGraph,
    Bipotential, LinearBijection, Point, SyncFn,
};
pub use convex::{
    inf_convolution, prox, subgradient_member, Domain, ExtendedReal, HydroDevFn, InfConvolution,
    MetricWeights, ProxRegion, ProxResult, SecondOrderCone,
};
pub use discretization::{
    material_point_driver, Discretization, Edge, EdgeDirichlet, EdgeTraction, PointSolveConfig,
    PointState,
};
pub use materials::{
    constitutive_inclusions_check, dp_bipotential, dp_bipotential_prime, elastic_bipotential,
    flow_pair, flow_rule_residual, k_strain_contains, k_stress_contains, project_stress,
    ConstitutiveReport, ConstitutiveState, DruckerPragerParams, ElasticModuli,
};
pub use tensor::{
    duality, duality_prime, t1_inverse, t1_strain, t2_inverse, t2_stress, HydroDevPair, SymTensor,
};
pub use timestepping::{
    delta_b, delta_b_grad_eps, homogenize, pdisc_residual, shifted_graph_gap,
    shifted_plastic_bipotential, DeltaB, HomogenizedStep, IncrementalLaw, Lifts, LoadIncrement,
    PdiscReport, Split, StepIncrement, StepState,
};
pub use solver::{
    global_step, local_step, local_step_projected, run_evolution, solve_step, verify_weak,
    EvolutionFailure, EvolutionRecord, Init, IterationRecord, IterationTrace, LoadTemplate,
    ScheduleEntry, SolveError, SolverConfig, StepProblem, Variant, WeakReport,
};
