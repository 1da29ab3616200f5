//! The alternating variational algorithm: a global displacement minimization
//! of the bifunctional against the frozen stress, then a pointwise local
//! stress update through the gradient of Δb_k, optionally projected into the
//! admissible cone so every iterate keeps the bifunctional finite.
//!
//! Convergence of the alternating sequence has no proof; non-convergence is
//! a first-class, well-reported outcome carrying the full iteration trace.
//!
//! The global objective is Σ w|J|·Δb_k(D(v)+ε̄, σ′+σ̄) − ⟨D(v), σ̄+σ′⟩₁. The
//! −⟨D(v), σ̄⟩₁ part is the homogenization lift load; the −⟨D(v), σ′⟩₁ part
//! vanishes identically while σ′ is statically admissible and is what the
//! projected variant needs once projection breaks equilibrium.

use crate::discretization::{Discretization, EdgeTraction};
use crate::materials::{project_stress, DruckerPragerParams, ElasticModuli};
use crate::tensor::{duality, SymTensor};
use crate::timestepping::{
    homogenize, pdisc_residual, HomogenizedStep, IncrementalLaw, Lifts, LoadIncrement,
    PdiscReport, StepIncrement, StepState,
};
use crate::Error;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Local-step flavor: plain gradient update, or the projected variant that
/// forces every stress iterate into K_stress.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Projected,
}

/// Initial iterate: zero fields or an elastic predictor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    Zero,
    Elastic,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SolverConfig {
    pub variant: Variant,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub weak_samples: usize,
    pub init: Init,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            variant: Variant::Projected,
            outer_tol: 1e-8,
            max_outer: 200,
            inner_tol: 1e-10,
            max_inner: 60,
            weak_samples: 1000,
            init: Init::Elastic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.outer_tol > 0.0 && self.inner_tol > 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidParameter("iteration counts must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// One outer iteration's bookkeeping (no monotone-decrease claim).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// max over points of the normalized gradient-form graph residual
    /// ‖∂_ε Δb_k − Δσ‖/(1 + ‖Δσ‖) at the new iterate.
    pub graph_gap: f64,
    /// SA(0,0) residual of the local-step output before any projection
    /// (the measure the alternating scheme equilibrates).
    pub sa_residual: f64,
    pub u_update: f64,
    pub sig_update: f64,
    /// Whether every stress iterate passes the exact K_stress inequality at
    /// every quadrature point after this iteration's update.
    pub stress_feasible: bool,
}

pub type IterationTrace = Vec<IterationRecord>;

/// Solve failure carrying the trace up to the failing iteration.
#[derive(Debug)]
pub struct SolveError {
    pub error: Error,
    pub trace: IterationTrace,
}

impl std::fmt::Display for SolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} outer iterations", self.error, self.trace.len())
    }
}

impl std::error::Error for SolveError {}

/// Everything one homogenized incremental solve needs: the mesh, the law at
/// every quadrature point, and the lift shifts.
pub struct StepProblem<'a> {
    pub disc: &'a Discretization,
    pub moduli: ElasticModuli,
    pub params: DruckerPragerParams,
    pub dt: f64,
    pub sig_k: &'a [SymTensor],
    pub eps_shift: Vec<SymTensor>,
    pub sig_shift: Vec<SymTensor>,
}

impl<'a> StepProblem<'a> {
    pub fn new(
        disc: &'a Discretization,
        moduli: ElasticModuli,
        params: DruckerPragerParams,
        dt: f64,
        sig_k: &'a [SymTensor],
        homog: &HomogenizedStep,
    ) -> Self {
        StepProblem {
            disc,
            moduli,
            params,
            dt,
            sig_k,
            eps_shift: homog.eps_shift.clone(),
            sig_shift: homog.sig_shift.clone(),
        }
    }

    /// Shift-free problem (zero loads and boundary increments).
    pub fn unloaded(
        disc: &'a Discretization,
        moduli: ElasticModuli,
        params: DruckerPragerParams,
        dt: f64,
        sig_k: &'a [SymTensor],
    ) -> Self {
        let n = disc.num_points();
        StepProblem {
            disc,
            moduli,
            params,
            dt,
            sig_k,
            eps_shift: vec![SymTensor::ZERO; n],
            sig_shift: vec![SymTensor::ZERO; n],
        }
    }

    fn law(&self, q: usize) -> IncrementalLaw {
        IncrementalLaw::new(self.moduli, self.params, self.dt, self.sig_k[q])
    }

    /// Total stress state σ_k + σ′ + σ̄ per point. The solver internals carry
    /// these states verbatim (projection outputs must not round-trip through
    /// increment algebra, or the exact cone feasibility of criterion-style
    /// audits is lost to ulps).
    fn states_of_prime(&self, sig_prime: &[SymTensor]) -> Vec<SymTensor> {
        (0..sig_prime.len())
            .map(|q| self.sig_k[q].add(&sig_prime[q]).add(&self.sig_shift[q]))
            .collect()
    }

    fn prime_of_states(&self, states: &[SymTensor]) -> Vec<SymTensor> {
        (0..states.len())
            .map(|q| states[q].sub(&self.sig_k[q]).sub(&self.sig_shift[q]))
            .collect()
    }

    fn dsig_tot(&self, q: usize, states: &[SymTensor]) -> SymTensor {
        states[q].sub(&self.sig_k[q])
    }

    /// Global objective at a homogenized displacement iterate:
    /// Σ w|J|·Δb_k(D(v)+ε̄, σ′+σ̄) − ⟨D(v), σ̄⟩₁, for both variants — its
    /// stationarity is what equilibrates the local-step output. (Subtracting
    /// ⟨D(v), σ′⟩₁ as well creates spurious fixed points where the
    /// constitutive graph holds without equilibrium.)
    fn objective_states(&self, states: &[SymTensor], u: &[f64]) -> Result<f64, Error> {
        let strains = self.disc.strain_op(u)?;
        let weights = self.disc.weights();
        let mut total = 0.0;
        for q in 0..strains.len() {
            let deps_tot = strains[q].add(&self.eps_shift[q]);
            let v = self.law(q).delta_b(&deps_tot, &self.dsig_tot(q, states))?.value;
            match v.finite_value() {
                Some(v) => {
                    total += weights[q] * (v - duality(&strains[q], &self.sig_shift[q]));
                }
                None => return Ok(f64::INFINITY),
            }
        }
        Ok(total)
    }

    /// max over points of the normalized graph residual of Δb_k in gradient
    /// form, ‖∂_ε Δb_k − Δσ‖/(1 + ‖Δσ‖): the incremental constitutive law's
    /// own residual (the subgradient is a singleton). The value-form gap is quadratically
    /// small in this one, so converging it controls the weak margins linearly.
    pub fn graph_gap_norm(&self, sig_prime: &[SymTensor], u: &[f64]) -> Result<f64, Error> {
        self.graph_gap_norm_states(&self.states_of_prime(sig_prime), u)
    }

    fn graph_gap_norm_states(&self, states: &[SymTensor], u: &[f64]) -> Result<f64, Error> {
        let strains = self.disc.strain_op(u)?;
        let mut worst = 0.0f64;
        for q in 0..strains.len() {
            let deps_tot = strains[q].add(&self.eps_shift[q]);
            let dsig_tot = self.dsig_tot(q, states);
            let grad = self.law(q).grad_eps(&deps_tot, &dsig_tot)?;
            let resid = grad.sub(&dsig_tot).norm() / (1.0 + dsig_tot.norm());
            worst = worst.max(resid);
        }
        Ok(worst)
    }
}

fn solve_spd(k: &DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    k.clone()
        .cholesky()
        .map(|ch| ch.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec())
}

/// Minimizes v ↦ B(D(v)+ε̄, σᵏ) − ⟨D(v), σ̄+σᵏ⟩₁ over CA(0) displacements by
/// damped Newton with per-point consistent tangents and Armijo backtracking.
/// The problem is convex, so first-order stationarity certifies minimality.
pub fn global_step(
    problem: &StepProblem,
    sig_prime: &[SymTensor],
    u_init: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>, Error> {
    global_step_states(problem, &problem.states_of_prime(sig_prime), u_init, cfg)
}

fn global_step_states(
    problem: &StepProblem,
    states: &[SymTensor],
    u_init: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<f64>, Error> {
    let disc = problem.disc;
    let mut u = u_init.to_vec();
    disc.apply_mask(&mut u);
    let weights = disc.weights();
    let mut force_scale: Option<f64> = None;

    for _ in 0..cfg.max_inner {
        let strains = disc.strain_op(&u)?;
        let n_q = strains.len();
        let mut grads = Vec::with_capacity(n_q);
        let mut tangents = Vec::with_capacity(n_q);
        for q in 0..n_q {
            let deps_tot = strains[q].add(&problem.eps_shift[q]);
            let dsig_tot = problem.dsig_tot(q, states);
            let (_, grad, tangent) = problem
                .law(q)
                .full(&deps_tot, &dsig_tot)
                .map_err(|e| Error::PointFailure { point: q, source: Box::new(e) })?;
            grads.push(grad);
            tangents.push(tangent);
        }
        // gradient of the objective: ∫⟨∂_εΔb − σ̄, D(φ_i)⟩, masked
        let integrand: Vec<SymTensor> = (0..n_q)
            .map(|q| grads[q].sub(&problem.sig_shift[q]))
            .collect();
        let mut g = disc.internal_force(&integrand)?;
        disc.apply_mask(&mut g);
        let g_norm = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let scale = *force_scale.get_or_insert_with(|| {
            let mut s = 1.0;
            for q in 0..n_q {
                s += weights[q] * (grads[q].norm() + states[q].norm());
            }
            s
        });
        if g_norm <= cfg.inner_tol * scale {
            return Ok(u);
        }

        // Newton direction with escalating Tikhonov fallback
        let k = disc.assemble_operator(|q, b| tangents[q].apply(b))?;
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let n = k.nrows();
        let diag_scale = (0..n).map(|i| k[(i, i)].abs()).fold(0.0f64, f64::max).max(1.0);
        let mut direction = None;
        let mut reg = 0.0;
        for _ in 0..6 {
            let kk = if reg > 0.0 {
                let mut kk = k.clone();
                for i in 0..n {
                    kk[(i, i)] += reg;
                }
                kk
            } else {
                k.clone()
            };
            if let Some(d) = solve_spd(&kk, &rhs) {
                direction = Some(d);
                break;
            }
            reg = if reg == 0.0 { 1e-12 * diag_scale } else { reg * 100.0 };
        }
        let mut d = direction.unwrap_or_else(|| rhs.clone());
        disc.apply_mask(&mut d);

        let obj0 = problem.objective_states(states, &u)?;
        if !obj0.is_finite() {
            return Err(Error::InfiniteValue {
                context: "global objective infinite at current iterate (plain variant domain violation)",
            });
        }
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        // predicted decrease below what f64 can measure on the objective:
        // take the full Newton step unverified (within a global step the
        // objective is finite for every u — the domain constraint is on σ)
        if slope.abs() <= 1e4 * f64::EPSILON * (1.0 + obj0.abs()) {
            for (x, dd) in u.iter_mut().zip(&d) {
                *x += dd;
            }
            continue;
        }
        let mut accepted = false;
        for attempt in 0..2 {
            let (dir, dir_slope) = if attempt == 0 {
                (d.clone(), slope)
            } else {
                // steepest-descent fallback at cone-region boundaries
                let sd: Vec<f64> = g.iter().map(|v| -v).collect();
                let s: f64 = g.iter().zip(&sd).map(|(a, b)| a * b).sum();
                (sd, s)
            };
            if dir_slope >= 0.0 {
                continue;
            }
            let mut t = 1.0;
            while t >= 1e-14 {
                let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                let obj = problem.objective_states(states, &trial)?;
                if obj <= obj0 + 1e-4 * t * dir_slope
                    || (obj <= obj0 && (t * dir_slope).abs() <= 16.0 * f64::EPSILON * (1.0 + obj0.abs()))
                {
                    u = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(Error::LineSearchFailure);
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_inner,
        residual: f64::NAN,
    })
}

/// Plain local update: σ′ᵏ⁺¹ = ∂_ε Δb_k(D(uᵏ⁺¹)+ε̄, σ′ᵏ+σ̄) − σ̄ pointwise
/// (the subgradient is a singleton).
pub fn local_step(
    problem: &StepProblem,
    u_next: &[f64],
    sig_prime: &[SymTensor],
) -> Result<Vec<SymTensor>, Error> {
    let states = problem.states_of_prime(sig_prime);
    let next = local_step_states(problem, u_next, &states)?;
    Ok(problem.prime_of_states(&next))
}

/// Projected local update: the stress state σ_k + Δσ is pushed into K_stress
/// pointwise, so the next outer iterate keeps Δb_k finite.
pub fn local_step_projected(
    problem: &StepProblem,
    u_next: &[f64],
    sig_prime: &[SymTensor],
) -> Result<Vec<SymTensor>, Error> {
    let states = problem.states_of_prime(sig_prime);
    let next = project_states(problem, &local_step_states(problem, u_next, &states)?);
    Ok(problem.prime_of_states(&next))
}

/// Candidate next stress states σ_k + ∂_ε Δb_k(D(uᵏ⁺¹)+ε̄, ·) per point.
fn local_step_states(
    problem: &StepProblem,
    u_next: &[f64],
    states: &[SymTensor],
) -> Result<Vec<SymTensor>, Error> {
    let strains = problem.disc.strain_op(u_next)?;
    let mut out = Vec::with_capacity(strains.len());
    for q in 0..strains.len() {
        let deps_tot = strains[q].add(&problem.eps_shift[q]);
        let dsig_tot = problem.dsig_tot(q, states);
        let grad = problem
            .law(q)
            .grad_eps(&deps_tot, &dsig_tot)
            .map_err(|e| Error::PointFailure { point: q, source: Box::new(e) })?;
        out.push(problem.sig_k[q].add(&grad));
    }
    Ok(out)
}

fn project_states(problem: &StepProblem, states: &[SymTensor]) -> Vec<SymTensor> {
    states
        .iter()
        .map(|s| project_stress(&problem.params, s))
        .collect()
}

/// Alternates [`global_step`] and the chosen local step from (0, σ′⁰) until
/// the graph gap, the equilibrium residual and both update norms fall under
/// `outer_tol`, or `max_outer` is hit (an error carrying the trace; no
/// convergence rate is available).
pub fn solve_step(
    problem: &StepProblem,
    cfg: &SolverConfig,
) -> Result<(StepIncrement, IterationTrace), Box<SolveError>> {
    let fail = |error: Error, trace: &IterationTrace| {
        Box::new(SolveError { error, trace: trace.clone() })
    };
    let mut trace: IterationTrace = Vec::new();
    cfg.validate().map_err(|e| fail(e, &trace))?;
    let disc = problem.disc;
    let n_q = disc.num_points();

    let mut u = vec![0.0; disc.num_dofs()];
    let mut states = problem.sig_k.to_vec();
    match cfg.init {
        Init::Zero => {}
        Init::Elastic => {
            // linear pre-solve of the homogenized elastic problem:
            // K v = −∫⟨S ε̄ − σ̄, D(φ)⟩
            let integrand: Vec<SymTensor> = (0..n_q)
                .map(|q| problem.moduli.apply_s(&problem.eps_shift[q]).sub(&problem.sig_shift[q]))
                .collect();
            if disc.num_dofs() > 0 {
                let mut rhs = disc.internal_force(&integrand).map_err(|e| fail(e, &trace))?;
                disc.apply_mask(&mut rhs);
                for v in &mut rhs {
                    *v = -*v;
                }
                let k = disc
                    .elastic_stiffness(&problem.moduli)
                    .map_err(|e| fail(e, &trace))?;
                let v = solve_spd(&k, &rhs).ok_or_else(|| {
                    fail(Error::LinearSolve("elastic predictor stiffness not SPD".into()), &trace)
                })?;
                u = v;
                disc.apply_mask(&mut u);
            }
            let strains = disc.strain_op(&u).map_err(|e| fail(e, &trace))?;
            for q in 0..n_q {
                let deps_tot = strains[q].add(&problem.eps_shift[q]);
                states[q] = problem.sig_k[q].add(&problem.moduli.apply_s(&deps_tot));
            }
        }
    }
    // one-time feasibility repair of the initial state for both variants
    // (distinct from the local-step projection; keeps the first global
    // objective finite when the predictor overshoots the cone)
    states = project_states(problem, &states);

    for iteration in 1..=cfg.max_outer {
        let u_next =
            global_step_states(problem, &states, &u, cfg).map_err(|e| fail(e, &trace))?;
        let candidate = local_step_states(problem, &u_next, &states).map_err(|e| fail(e, &trace))?;
        let sa_residual = {
            let prime = problem.prime_of_states(&candidate);
            disc.sa_residual(&prime).map_err(|e| fail(e, &trace))?
        };
        let states_next = match cfg.variant {
            Variant::Plain => candidate,
            Variant::Projected => project_states(problem, &candidate),
        };
        let graph_gap = problem
            .graph_gap_norm_states(&states_next, &u_next)
            .map_err(|e| fail(e, &trace))?;
        let u_update = {
            let num = u
                .iter()
                .zip(&u_next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            let den = 1.0 + u.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            num / den
        };
        let sig_update = {
            let mut worst = 0.0f64;
            for q in 0..n_q {
                let num = states_next[q].sub(&states[q]).norm();
                worst = worst.max(num / (1.0 + problem.dsig_tot(q, &states).norm()));
            }
            worst
        };
        let objective = problem
            .objective_states(&states_next, &u_next)
            .map_err(|e| fail(e, &trace))?;
        // exact inequality on the stored states: no increment round-trip
        let stress_feasible = states_next.iter().all(|s| {
            crate::materials::k_stress_contains(&problem.params, &crate::tensor::t2_stress(s))
        });
        trace.push(IterationRecord {
            iteration,
            objective,
            graph_gap,
            sa_residual,
            u_update,
            sig_update,
            stress_feasible,
        });
        u = u_next;
        states = states_next;
        if graph_gap.max(sa_residual).max(u_update).max(sig_update) <= cfg.outer_tol {
            // assemble the increment from the minimizing split at every point
            let strains = disc.strain_op(&u).map_err(|e| fail(e, &trace))?;
            let mut deps_e = Vec::with_capacity(n_q);
            let mut deps_p = Vec::with_capacity(n_q);
            let mut dsig = Vec::with_capacity(n_q);
            for q in 0..n_q {
                let deps_tot = strains[q].add(&problem.eps_shift[q]);
                let dsig_tot = problem.dsig_tot(q, &states);
                let d = problem
                    .law(q)
                    .delta_b(&deps_tot, &dsig_tot)
                    .map_err(|e| fail(e, &trace))?;
                let split = d.split.ok_or_else(|| {
                    fail(
                        Error::InfiniteValue { context: "converged state has inadmissible stress" },
                        &trace,
                    )
                })?;
                deps_e.push(split.elastic);
                deps_p.push(split.plastic);
                dsig.push(dsig_tot);
            }
            let inc = StepIncrement { du: u, deps_p, deps_e, dsig };
            return Ok((inc, trace));
        }
    }
    let residual = trace.last().map(|r| {
        r.graph_gap.max(r.sa_residual).max(r.u_update).max(r.sig_update)
    });
    Err(Box::new(SolveError {
        error: Error::NonConvergence {
            iterations: cfg.max_outer,
            residual: residual.unwrap_or(f64::NAN),
        },
        trace,
    }))
}

/// Weak-inequality margins of a candidate solution.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct WeakReport {
    pub worst_margin: f64,
    pub probes: usize,
}

/// Checks B(D(u), σ) ≤ B(ε, σ) − ⟨ε, σ⟩₁ over random fields, per-point
/// perturbations of D(u), and strains of random admissible displacements.
/// The margin is RHS − LHS; the report carries the worst (most negative).
pub fn verify_weak(
    problem: &StepProblem,
    u_prime: &[f64],
    sig_prime: &[SymTensor],
    probes: usize,
    seed: u64,
) -> Result<WeakReport, Error> {
    let disc = problem.disc;
    let n_q = disc.num_points();
    let weights = disc.weights();
    let strains = disc.strain_op(u_prime)?;
    let states = problem.states_of_prime(sig_prime);
    let point_value = |q: usize, eps_q: &SymTensor| -> Result<f64, Error> {
        let dsig_tot = problem.dsig_tot(q, &states);
        let v = problem
            .law(q)
            .delta_b(&eps_q.add(&problem.eps_shift[q]), &dsig_tot)?
            .value;
        v.finite_value().ok_or(Error::InfiniteValue { context: "verify_weak probe" })
    };
    // margin(ε) = Σ w[Δb(ε+ε̄) − Δb(D(u′)+ε̄) − ⟨ε − D(u′), σ̄⟩ − ⟨ε, σ′⟩]
    let base: Result<Vec<f64>, Error> = (0..n_q).map(|q| point_value(q, &strains[q])).collect();
    let base = base?;
    let margin_of = |eps: &[SymTensor]| -> Result<f64, Error> {
        let mut m = 0.0;
        for q in 0..n_q {
            let v = point_value(q, &eps[q])?;
            m += weights[q]
                * (v - base[q]
                    - duality(&eps[q].sub(&strains[q]), &problem.sig_shift[q])
                    - duality(&eps[q], &sig_prime[q]));
        }
        Ok(m)
    };
    // the inequality is checked exactly as printed: the omitted ⟨D(u′), σ′⟩
    // term vanishes for σ′ ∈ SA(0,0), u′ ∈ CA(0)
    let strain_scale = 1e-3
        + strains.iter().map(|e| e.norm()).fold(0.0f64, f64::max)
        + problem.eps_shift.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut count = 0;
    let n_random = probes / 3;
    let n_structured = probes / 3;
    let n_admissible = probes - n_random - n_structured;
    for _ in 0..n_random {
        let eps: Vec<SymTensor> = (0..n_q)
            .map(|_| crate::sampling::random_sym(&mut rng, strain_scale))
            .collect();
        worst = worst.min(margin_of(&eps)?);
        count += 1;
    }
    for _ in 0..n_structured {
        let mut eps = strains.clone();
        let q = rng.gen_range(0..n_q);
        let t: f64 = rng.gen_range(-2.0..2.0);
        eps[q] = eps[q].add(&crate::sampling::random_sym(&mut rng, 1.0).scale(t * strain_scale));
        worst = worst.min(margin_of(&eps)?);
        count += 1;
    }
    for _ in 0..n_admissible {
        let mut v: Vec<f64> = (0..disc.num_dofs())
            .map(|_| rng.gen_range(-1.0..1.0) * strain_scale)
            .collect();
        disc.apply_mask(&mut v);
        let eps = disc.strain_op(&v)?;
        worst = worst.min(margin_of(&eps)?);
        count += 1;
    }
    Ok(WeakReport { worst_margin: worst, probes: count })
}

/// Fixed per-scenario load shapes; the schedule scales them per step.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LoadTemplate {
    pub body: [f64; 2],
    pub tractions: Vec<EdgeTraction>,
}

/// One step of the evolution schedule.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub dt: f64,
    pub boundary_scale: f64,
    pub load_scale: f64,
}

/// Full evolution output: the state after every accepted step with its trace,
/// incremental-problem residual report and weak-inequality margins.
#[derive(Debug, Default)]
pub struct EvolutionRecord {
    pub states: Vec<StepState>,
    pub increments: Vec<StepIncrement>,
    pub traces: Vec<IterationTrace>,
    pub reports: Vec<PdiscReport>,
    pub weak: Vec<WeakReport>,
}

/// Evolution failure carrying the history up to the failed step.
#[derive(Debug)]
pub struct EvolutionFailure {
    pub step: usize,
    pub error: Box<SolveError>,
    pub partial: EvolutionRecord,
}

impl std::fmt::Display for EvolutionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step {} failed: {}", self.step, self.error)
    }
}

impl std::error::Error for EvolutionFailure {}

/// Marches the state through the schedule: per step, build lifts (zero-extended
/// Dirichlet ramp; σ̄ from a linear elastic pre-solve of the load form),
/// homogenize, solve, recover, update.
#[allow(clippy::too_many_arguments)]
pub fn run_evolution(
    disc: &Discretization,
    moduli: ElasticModuli,
    params: DruckerPragerParams,
    initial: StepState,
    template: &LoadTemplate,
    schedule: &[ScheduleEntry],
    cfg: &SolverConfig,
    seed: u64,
) -> Result<EvolutionRecord, Box<EvolutionFailure>> {
    let mut record = EvolutionRecord {
        states: vec![initial],
        ..Default::default()
    };
    // schedule scales are cumulative; each step applies the difference
    let mut prev_boundary = 0.0;
    let mut prev_load = 0.0;
    for (step, entry) in schedule.iter().enumerate() {
        let d_boundary = entry.boundary_scale - prev_boundary;
        let d_load = entry.load_scale - prev_load;
        prev_boundary = entry.boundary_scale;
        prev_load = entry.load_scale;
        let state = record.states.last().expect("nonempty states").clone();
        let step_fail = |error: Error, record: EvolutionRecord| {
            Box::new(EvolutionFailure {
                step,
                error: Box::new(SolveError { error, trace: Vec::new() }),
                partial: record,
            })
        };
        // load increment in assembled form
        let dirichlet_values = disc.dirichlet_values(d_boundary);
        let body = [template.body[0] * d_load, template.body[1] * d_load];
        let tractions: Vec<EdgeTraction> = template
            .tractions
            .iter()
            .map(|t| EdgeTraction { edge: t.edge, tx: t.tx * d_load, ty: t.ty * d_load })
            .collect();
        let load_vector = disc.assemble_loads(body, &tractions);
        let loads = LoadIncrement { dirichlet_values: dirichlet_values.clone(), load_vector: load_vector.clone() };

        // lifts: ū = zero-extended Dirichlet ramp; σ̄ from an elastic pre-solve
        let u_bar = dirichlet_values;
        let sig_bar = match elastic_lift(disc, &moduli, &load_vector) {
            Ok(s) => s,
            Err(e) => return Err(step_fail(e, record)),
        };
        let lifts = Lifts { u_bar, sig_bar };
        let homog = match homogenize(disc, &loads, &lifts) {
            Ok(h) => h,
            Err(e) => return Err(step_fail(e, record)),
        };
        let problem = StepProblem::new(disc, moduli, params, entry.dt, &state.sig, &homog);
        let (inc_prime, trace) = match solve_step(&problem, cfg) {
            Ok(ok) => ok,
            Err(e) => {
                return Err(Box::new(EvolutionFailure { step, error: e, partial: record }))
            }
        };
        // recover original unknowns
        let du = homog.recover_u(&inc_prime.du);
        let inc = StepIncrement {
            du: du.clone(),
            deps_p: inc_prime.deps_p.clone(),
            deps_e: inc_prime.deps_e.clone(),
            dsig: inc_prime.dsig.clone(),
        };
        let report = match pdisc_residual(&moduli, &params, &state, &inc, disc, &loads) {
            Ok(r) => r,
            Err(e) => return Err(step_fail(e, record)),
        };
        // weak-inequality margins of the accepted homogenized solution
        let weak = {
            let sig_prime: Vec<SymTensor> = inc_prime
                .dsig
                .iter()
                .zip(&homog.sig_shift)
                .map(|(a, b)| a.sub(b))
                .collect();
            match verify_weak(
                &problem,
                &inc_prime.du,
                &sig_prime,
                cfg.weak_samples,
                seed.wrapping_add(step as u64),
            ) {
                Ok(w) => w,
                Err(e) => return Err(step_fail(e, record)),
            }
        };
        // state update
        let mut next = state.clone();
        for i in 0..next.u.len() {
            next.u[i] += du[i];
        }
        for q in 0..disc.num_points() {
            next.eps_p[q] = next.eps_p[q].add(&inc.deps_p[q]);
            next.eps_e[q] = next.eps_e[q].add(&inc.deps_e[q]);
            next.sig[q] = next.sig[q].add(&inc.dsig[q]);
        }
        next.t += entry.dt;
        next.dt = entry.dt;
        record.states.push(next);
        record.increments.push(inc);
        record.traces.push(trace);
        record.reports.push(report);
        record.weak.push(weak);
    }
    Ok(record)
}

/// σ̄ = S·D(u_L) with K u_L = load vector: statically admissible for the load
/// form by construction (same quadrature on both sides).
fn elastic_lift(
    disc: &Discretization,
    moduli: &ElasticModuli,
    load_vector: &[f64],
) -> Result<Vec<SymTensor>, Error> {
    if disc.num_dofs() == 0 {
        return Ok(vec![SymTensor::ZERO; disc.num_points()]);
    }
    let mut rhs = load_vector.to_vec();
    disc.apply_mask(&mut rhs);
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(vec![SymTensor::ZERO; disc.num_points()]);
    }
    let k = disc.elastic_stiffness(moduli)?;
    let mut u_l = solve_spd(&k, &rhs)
        .ok_or_else(|| Error::LinearSolve("lift stiffness not SPD".into()))?;
    disc.apply_mask(&mut u_l);
    let eps = disc.strain_op(&u_l)?;
    Ok(eps.iter().map(|e| moduli.apply_s(e)).collect())
}
