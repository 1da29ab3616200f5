//! One implicit time step at a material point: the shifted plastic
//! bipotential b_{p,k}, its inf-convolution Δb_k with the elastic bipotential
//! (value, minimizing elastic/plastic split, gradient, consistent tangent),
//! boundary-condition homogenization and the per-equation residual report of
//! the incremental problem.
//!
//! Δb_k(Δε, Δσ) = inf over splits Δε = Δεᵉ + Δεᵖ of
//! b_e(Δεᵉ, Δσ) + b_{p,k}(Δεᵖ, Δσ). The infimum is a prox in the S-metric
//! and is computed in closed form; the split is always returned because the
//! state update and the solver's local step need it.

use crate::convex::{prox, ExtendedReal, HydroDevFn, ProxRegion, SecondOrderCone};
use crate::materials::{
    dp_bipotential, elastic_bipotential, stress_in_domain, DruckerPragerParams, ElasticModuli,
};
use crate::tensor::{duality, t1_inverse, t1_strain, t2_stress, SymTensor};
use crate::Error;
use serde::{Deserialize, Serialize};

/// b_{p,k}(Δεᵖ, Δσ) = Δt·b_p(Δεᵖ/Δt, σ_k + Δσ) − ⟨Δεᵖ, σ_k⟩.
///
/// The Drücker-Prager b_p is positively homogeneous in its rate argument, so
/// the value is Δt-invariant; Δt is kept in the signature because the graph
/// statement is about the rate Δεᵖ/Δt.
pub fn shifted_plastic_bipotential(
    params: &DruckerPragerParams,
    sig_k: &SymTensor,
    dt: f64,
    deps_p: &SymTensor,
    dsig: &SymTensor,
) -> ExtendedReal {
    assert!(dt > 0.0, "step length must be positive");
    let sig_tot = sig_k.add(dsig);
    let rate = deps_p.scale(1.0 / dt);
    match dp_bipotential(params, &rate, &sig_tot).finite_value() {
        Some(v) => ExtendedReal::finite(dt * v - duality(deps_p, sig_k)),
        None => ExtendedReal::INFINITY,
    }
}

/// b_{p,k} − ⟨Δεᵖ, Δσ⟩: zero exactly on the graph, i.e. exactly when
/// Δεᵖ/Δt is a flow-rule rate at σ_k + Δσ.
pub fn shifted_graph_gap(
    params: &DruckerPragerParams,
    sig_k: &SymTensor,
    dt: f64,
    deps_p: &SymTensor,
    dsig: &SymTensor,
) -> ExtendedReal {
    match shifted_plastic_bipotential(params, sig_k, dt, deps_p, dsig).finite_value() {
        Some(v) => ExtendedReal::finite(v - duality(deps_p, dsig)),
        None => ExtendedReal::INFINITY,
    }
}

/// b_{p,k} as an auditable bipotential object on tensor increments.
pub fn shifted_plastic_bipotential_object(
    params: DruckerPragerParams,
    sig_k: SymTensor,
    dt: f64,
) -> crate::bipotential::Bipotential<SymTensor, SymTensor> {
    crate::bipotential::Bipotential::new(
        format!("b_pk(dt={dt})"),
        move |deps_p: &SymTensor, dsig: &SymTensor| {
            shifted_plastic_bipotential(&params, &sig_k, dt, deps_p, dsig)
        },
        duality,
    )
}

/// Finite branch of b_{p,k}, bypassing the indicator re-evaluation (used for
/// splits that are feasible by construction, where an ulp of reconstruction
/// rounding must not flip the value to +∞).
fn shifted_finite_value(
    params: &DruckerPragerParams,
    sig_k: &SymTensor,
    deps_p: &SymTensor,
    sig_tot_trace: f64,
) -> f64 {
    let c1 = params.c1();
    let tr_p = deps_p.trace();
    params.c1() * tr_p + params.c2() * (sig_tot_trace - c1) * deps_p.deviator().norm()
        - (2.0 / 3.0) * tr_p * sig_tot_trace
        - duality(deps_p, sig_k)
}

/// Minimizing split of Δb_k.
#[derive(Clone, Copy, Debug)]
pub struct Split {
    pub elastic: SymTensor,
    pub plastic: SymTensor,
}

/// Value and split of Δb_k at one (Δε, Δσ). The split is `None` exactly when
/// the value is +∞ (inadmissible total stress).
#[derive(Clone, Debug)]
pub struct DeltaB {
    pub value: ExtendedReal,
    pub split: Option<Split>,
}

/// Consistent tangent d(∂_ε Δb_k)/dΔε at fixed Δσ: one closed form per
/// analytic region of the prox solution. Applied as a linear map so assembly
/// never touches component-matrix conventions.
#[derive(Clone, Debug)]
pub struct Tangent {
    moduli: ElasticModuli,
    kind: TangentKind,
}

#[derive(Clone, Debug)]
enum TangentKind {
    /// No active plastic flow: C = S.
    Elastic,
    /// Volumetric flow only (ρ* = 0, mean absorbed): C = 2μ·P_dev.
    DevElastic,
    /// Full deviatoric absorption with radial curvature:
    /// C = k·(P_dev − d̂⊗d̂), k = c_ρ/‖d̄‖.
    Radial { k: f64, dir: SymTensor },
    /// On the slanted cone edge: rank-structured blocks.
    Face { beta: f64, dir: SymTensor, rho_over_r: f64 },
}

impl Tangent {
    /// Analytic region this tangent belongs to; finite-difference oracles use
    /// it to reject stencils that straddle a curvature kink.
    pub fn region_label(&self) -> &'static str {
        match &self.kind {
            TangentKind::Elastic => "elastic",
            TangentKind::DevElastic => "dev_elastic",
            TangentKind::Radial { .. } => "radial",
            TangentKind::Face { .. } => "face",
        }
    }

    pub fn apply(&self, delta: &SymTensor) -> SymTensor {
        let w = self.moduli.metric_weights();
        match &self.kind {
            TangentKind::Elastic => self.moduli.apply_s(delta),
            TangentKind::DevElastic => delta.deviator().scale(2.0 * self.moduli.mu),
            TangentKind::Radial { k, dir } => {
                let dd = delta.deviator();
                dd.sub(&dir.scale(duality(dir, &dd))).scale(*k)
            }
            TangentKind::Face { beta, dir, rho_over_r } => {
                let d0 = beta * beta * w.mean + w.dev;
                let de_m = delta.trace() / 3.0;
                let de_d = delta.deviator();
                let ddot = duality(dir, &de_d);
                let dtr = (w.mean * w.dev / d0) * de_m - (beta * w.mean * w.dev / d0) * ddot;
                let ddev = de_d.scale(w.dev * (1.0 - rho_over_r)).add(&dir.scale(
                    w.dev * (-(beta * w.mean / d0) * de_m - (w.dev / d0) * ddot + rho_over_r * ddot),
                ));
                SymTensor::IDENTITY.scale(dtr / 3.0).add(&ddev)
            }
        }
    }
}

/// Per-point incremental law: everything Δb_k at a fixed previous stress and
/// step length.
#[derive(Clone, Copy, Debug)]
pub struct IncrementalLaw {
    pub moduli: ElasticModuli,
    pub params: DruckerPragerParams,
    pub dt: f64,
    pub sig_k: SymTensor,
}

impl IncrementalLaw {
    pub fn new(
        moduli: ElasticModuli,
        params: DruckerPragerParams,
        dt: f64,
        sig_k: SymTensor,
    ) -> Self {
        IncrementalLaw { moduli, params, dt, sig_k }
    }

    fn prox_problem(
        &self,
        dsig: &SymTensor,
    ) -> Option<(HydroDevFn, f64)> {
        let sig_tot = self.sig_k.add(dsig);
        let stress_pair = t2_stress(&sig_tot);
        if !stress_in_domain(&self.params, &stress_pair) {
            return None;
        }
        let c1 = self.params.c1();
        // ≥ 0 on the admissible cone; clamp absorbs boundary rounding
        let c_rho = (self.params.c2() * (stress_pair.mean - c1)).max(0.0);
        let alpha_m = 3.0 * c1 - 2.0 * stress_pair.mean - self.sig_k.trace();
        let beta_eff = self.params.k_d * self.params.theta.tan() / 3.0;
        let f = HydroDevFn::linear_radial(alpha_m, c_rho)
            .with_lin_dev(self.sig_k.deviator().scale(-1.0))
            .with_cone(SecondOrderCone::StrainForm { beta: beta_eff });
        Some((f, stress_pair.mean))
    }

    /// Δb_k(Δε, Δσ) with its minimizing split.
    pub fn delta_b(&self, deps: &SymTensor, dsig: &SymTensor) -> Result<DeltaB, Error> {
        let Some((f, tr_tot)) = self.prox_problem(dsig) else {
            return Ok(DeltaB { value: ExtendedReal::INFINITY, split: None });
        };
        let pr = prox(&f, &self.moduli.metric_weights(), &t1_strain(deps))?;
        let plastic = t1_inverse(&pr.argmin);
        let elastic = deps.sub(&plastic);
        let value = elastic_bipotential(&self.moduli, &elastic, dsig)
            + shifted_finite_value(&self.params, &self.sig_k, &plastic, tr_tot);
        Ok(DeltaB {
            value: ExtendedReal::finite(value),
            split: Some(Split { elastic, plastic }),
        })
    }

    /// ∂_ε Δb_k = S(Δε − Δεᵖ*): the unique subgradient (Moreau-Yosida form).
    pub fn grad_eps(&self, deps: &SymTensor, dsig: &SymTensor) -> Result<SymTensor, Error> {
        let d = self.delta_b(deps, dsig)?;
        match d.split {
            Some(s) => Ok(self.moduli.apply_s(&s.elastic)),
            None => Err(Error::InfiniteValue {
                context: "delta_b gradient at inadmissible total stress",
            }),
        }
    }

    /// Value, split, gradient and consistent tangent in one prox solve.
    pub fn full(
        &self,
        deps: &SymTensor,
        dsig: &SymTensor,
    ) -> Result<(DeltaB, SymTensor, Tangent), Error> {
        let Some((f, tr_tot)) = self.prox_problem(dsig) else {
            return Err(Error::InfiniteValue {
                context: "delta_b at inadmissible total stress",
            });
        };
        let pr = prox(&f, &self.moduli.metric_weights(), &t1_strain(deps))?;
        let plastic = t1_inverse(&pr.argmin);
        let elastic = deps.sub(&plastic);
        let value = elastic_bipotential(&self.moduli, &elastic, dsig)
            + shifted_finite_value(&self.params, &self.sig_k, &plastic, tr_tot);
        let grad = self.moduli.apply_s(&elastic);
        let beta_eff = self.params.k_d * self.params.theta.tan() / 3.0;
        let kind = match pr.region {
            ProxRegion::Apex => TangentKind::Elastic,
            ProxRegion::DevZero => TangentKind::DevElastic,
            ProxRegion::Interior | ProxRegion::Free => TangentKind::Radial {
                k: if pr.r_bar > 1e-300 { f.radial / pr.r_bar } else { 0.0 },
                dir: pr.dir,
            },
            ProxRegion::Slant => TangentKind::Face {
                beta: beta_eff,
                dir: pr.dir,
                rho_over_r: if pr.r_bar > 1e-300 { pr.rho_star / pr.r_bar } else { 0.0 },
            },
        };
        Ok((
            DeltaB {
                value: ExtendedReal::finite(value),
                split: Some(Split { elastic, plastic }),
            },
            grad,
            Tangent { moduli: self.moduli, kind },
        ))
    }

    /// Δb_k − ⟨Δε, Δσ⟩: ≥ 0 (weak Fenchel inequality), zero exactly when
    /// Δσ is the gradient of Δb_k at Δε (the incremental constitutive law).
    pub fn graph_gap(&self, deps: &SymTensor, dsig: &SymTensor) -> Result<ExtendedReal, Error> {
        let d = self.delta_b(deps, dsig)?;
        Ok(match d.value.finite_value() {
            Some(v) => ExtendedReal::finite(v - duality(deps, dsig)),
            None => ExtendedReal::INFINITY,
        })
    }
}

/// Δb_k(Δε, Δσ) = (b_e(·,Δσ) □ b_{p,k}(·,Δσ))(Δε) with the attaining split.
pub fn delta_b(
    moduli: &ElasticModuli,
    params: &DruckerPragerParams,
    sig_k: &SymTensor,
    dt: f64,
    deps: &SymTensor,
    dsig: &SymTensor,
) -> Result<DeltaB, Error> {
    IncrementalLaw::new(*moduli, *params, dt, *sig_k).delta_b(deps, dsig)
}

/// ∂_ε Δb_k = S(Δε − Δεᵖ*).
pub fn delta_b_grad_eps(
    moduli: &ElasticModuli,
    params: &DruckerPragerParams,
    sig_k: &SymTensor,
    dt: f64,
    deps: &SymTensor,
    dsig: &SymTensor,
) -> Result<SymTensor, Error> {
    IncrementalLaw::new(*moduli, *params, dt, *sig_k).grad_eps(deps, dsig)
}

/// Fields at time t_k. The elastic-consistency invariant εᵉ = S⁻¹σ is carried
/// between steps and checked by [`StepState::elastic_consistency_residual`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepState {
    pub u: Vec<f64>,
    pub eps_p: Vec<SymTensor>,
    pub eps_e: Vec<SymTensor>,
    pub sig: Vec<SymTensor>,
    pub t: f64,
    /// Length of the step that produced this state (0 at the initial state).
    pub dt: f64,
}

impl StepState {
    pub fn zero(num_dofs: usize, num_points: usize) -> Self {
        StepState {
            u: vec![0.0; num_dofs],
            eps_p: vec![SymTensor::ZERO; num_points],
            eps_e: vec![SymTensor::ZERO; num_points],
            sig: vec![SymTensor::ZERO; num_points],
            t: 0.0,
            dt: 0.0,
        }
    }

    pub fn elastic_consistency_residual(&self, moduli: &ElasticModuli) -> f64 {
        self.eps_e
            .iter()
            .zip(&self.sig)
            .map(|(e, s)| e.sub(&moduli.apply_s_inv(s)).norm())
            .fold(0.0, f64::max)
    }
}

/// Unknown increments of one Pdisc solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepIncrement {
    pub du: Vec<f64>,
    pub deps_p: Vec<SymTensor>,
    pub deps_e: Vec<SymTensor>,
    pub dsig: Vec<SymTensor>,
}

/// Per-step load data in assembled (weak) form.
#[derive(Clone, Debug, Default)]
pub struct LoadIncrement {
    /// Prescribed displacement increments on Dirichlet-masked dofs
    /// (ignored elsewhere).
    pub dirichlet_values: Vec<f64>,
    /// Assembled load linear form ⟨Δf, φ_i⟩ per dof.
    pub load_vector: Vec<f64>,
}

/// Caller-chosen lift fields: ū with the prescribed boundary values, and
/// σ̄ ∈ SA(Δf_v, Δf_s).
#[derive(Clone, Debug)]
pub struct Lifts {
    pub u_bar: Vec<f64>,
    pub sig_bar: Vec<SymTensor>,
}

/// Shift maps of the homogenized problem: unknowns (Δu′, Δσ′) relate to the
/// originals by Δu = Δu′ + ū, Δσ = Δσ′ + σ̄, Δε = D(Δu′) + D(ū).
#[derive(Clone, Debug)]
pub struct HomogenizedStep {
    pub u_lift: Vec<f64>,
    pub eps_shift: Vec<SymTensor>,
    pub sig_shift: Vec<SymTensor>,
}

impl HomogenizedStep {
    pub fn recover_u(&self, du_prime: &[f64]) -> Vec<f64> {
        du_prime.iter().zip(&self.u_lift).map(|(a, b)| a + b).collect()
    }

    pub fn recover_sig(&self, dsig_prime: &[SymTensor]) -> Vec<SymTensor> {
        dsig_prime
            .iter()
            .zip(&self.sig_shift)
            .map(|(a, b)| a.add(b))
            .collect()
    }
}

/// Residual at which a lift is rejected as inadmissible.
pub const LIFT_TOL: f64 = 1e-8;

/// Validates the supplied lifts and packages the shift maps. After this, the
/// unknowns live in CA(0) × SA(0, 0) and the constitutive evaluators are the
/// sync-translated ones (handled by the solver through `eps_shift`/`sig_shift`).
pub fn homogenize(
    disc: &crate::discretization::Discretization,
    loads: &LoadIncrement,
    lifts: &Lifts,
) -> Result<HomogenizedStep, Error> {
    // ū must carry the prescribed Dirichlet values exactly
    let mask = disc.dirichlet_mask();
    for (i, &m) in mask.iter().enumerate() {
        if m && (lifts.u_bar[i] - loads.dirichlet_values[i]).abs() > 1e-12 {
            return Err(Error::LiftInadmissible {
                residual: (lifts.u_bar[i] - loads.dirichlet_values[i]).abs(),
            });
        }
    }
    // σ̄ must satisfy the load equilibrium in the weak sense
    let f_int = disc.internal_force(&lifts.sig_bar)?;
    let mut worst = 0.0f64;
    let scale = 1.0
        + loads
            .load_vector
            .iter()
            .fold(0.0f64, |a, b| a.max(b.abs()))
        + disc.stress_l1(&lifts.sig_bar);
    for i in 0..f_int.len() {
        if !mask[i] {
            worst = worst.max((f_int[i] - loads.load_vector[i]).abs());
        }
    }
    if worst / scale > LIFT_TOL {
        return Err(Error::LiftInadmissible { residual: worst / scale });
    }
    let eps_shift = disc.strain_op(&lifts.u_bar)?;
    Ok(HomogenizedStep {
        u_lift: lifts.u_bar.clone(),
        eps_shift,
        sig_shift: lifts.sig_bar.clone(),
    })
}

/// Per-equation residuals of the incremental problem at a candidate solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdiscReport {
    /// max‖Δεᵉ + Δεᵖ − D(Δu)‖ over quadrature points.
    pub kinematic: f64,
    /// max‖Δεᵉ − S⁻¹Δσ‖ over quadrature points.
    pub elastic: f64,
    /// max normalized graph gap of b_{p,k} at (Δεᵖ, Δσ); +∞ clamps to f64::MAX.
    pub flow_gap: f64,
    /// Normalized weak equilibrium residual of Δσ against the load form.
    pub equilibrium: f64,
    /// max|Δu − Δū| on Dirichlet-masked dofs.
    pub dirichlet: f64,
}

impl PdiscReport {
    pub fn max_residual(&self) -> f64 {
        self.kinematic
            .max(self.elastic)
            .max(self.flow_gap)
            .max(self.equilibrium)
            .max(self.dirichlet)
    }
}

pub fn pdisc_residual(
    moduli: &ElasticModuli,
    params: &DruckerPragerParams,
    state: &StepState,
    inc: &StepIncrement,
    disc: &crate::discretization::Discretization,
    loads: &LoadIncrement,
) -> Result<PdiscReport, Error> {
    let strains = disc.strain_op(&inc.du)?;
    let dt = if state.dt > 0.0 { state.dt } else { 1.0 };
    let mut kinematic = 0.0f64;
    let mut elastic = 0.0f64;
    let mut flow_gap = 0.0f64;
    for q in 0..strains.len() {
        kinematic = kinematic.max(inc.deps_e[q].add(&inc.deps_p[q]).sub(&strains[q]).norm());
        elastic = elastic.max(inc.deps_e[q].sub(&moduli.apply_s_inv(&inc.dsig[q])).norm());
        let gap = shifted_graph_gap(params, &state.sig[q], dt, &inc.deps_p[q], &inc.dsig[q]);
        let scale = 1.0 + duality(&inc.deps_p[q], &inc.dsig[q]).abs();
        flow_gap = flow_gap.max(match gap.finite_value() {
            Some(g) => g.abs() / scale,
            None => f64::MAX,
        });
    }
    let f_int = disc.internal_force(&inc.dsig)?;
    let mask = disc.dirichlet_mask();
    let mut equilibrium = 0.0f64;
    let scale = 1.0
        + loads
            .load_vector
            .iter()
            .fold(0.0f64, |a, b| a.max(b.abs()))
        + disc.stress_l1(&inc.dsig);
    let mut dirichlet = 0.0f64;
    for i in 0..f_int.len() {
        if mask[i] {
            dirichlet = dirichlet.max((inc.du[i] - loads.dirichlet_values[i]).abs());
        } else {
            equilibrium = equilibrium.max((f_int[i] - loads.load_vector[i]).abs());
        }
    }
    Ok(PdiscReport {
        kinematic,
        elastic,
        flow_gap,
        equilibrium: equilibrium / scale,
        dirichlet,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{
        random_admissible_stress_tensor, random_flow_pair, random_stress_in_cone, random_sym,
    };
    use crate::tensor::t2_inverse;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moduli() -> ElasticModuli {
        ElasticModuli::new(1000.0, 800.0).unwrap()
    }

    fn params() -> DruckerPragerParams {
        DruckerPragerParams::new(2.0, 30f64.to_radians(), 10f64.to_radians(), 0.9).unwrap()
    }

    #[test]
    fn shifted_zero_increment_is_graph_point() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sig_k = random_admissible_stress_tensor(&mut rng, &p);
        // Δεᵖ = 0, σ_k + Δσ admissible: value 0 − 0 = 0
        let dsig = SymTensor::ZERO;
        let v = shifted_plastic_bipotential(&p, &sig_k, 0.1, &SymTensor::ZERO, &dsig);
        assert_eq!(v.value(), 0.0);
        let gap = shifted_graph_gap(&p, &sig_k, 0.1, &SymTensor::ZERO, &dsig);
        assert_eq!(gap.value(), 0.0);
    }

    #[test]
    fn shifted_inadmissible_total_stress_is_infinite() {
        let p = params();
        let sig_k = SymTensor::ZERO;
        let dsig = SymTensor::IDENTITY.scale(p.c1());
        let v = shifted_plastic_bipotential(&p, &sig_k, 0.1, &SymTensor::ZERO, &dsig);
        assert!(!v.is_finite());
    }

    #[test]
    fn shifted_dt_scaling_preserves_graph_membership() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let sig_k = random_admissible_stress_tensor(&mut rng, &p);
            let (rate, stress_tot) = random_flow_pair(&mut rng, &p, 1.0);
            let sig_tot = t2_inverse(&stress_tot);
            let dsig = sig_tot.sub(&sig_k);
            for dt in [0.05, 0.1, 0.2] {
                let deps_p = t2_inverse(&rate).scale(dt);
                let gap = shifted_graph_gap(&p, &sig_k, dt, &deps_p, &dsig).value();
                assert!(gap.abs() <= 1e-9 * (1.0 + sig_k.norm()), "gap {gap} at dt {dt}");
            }
        }
    }

    #[test]
    fn lemma1_rate_equivalence() {
        // b_{p,k} graph gap small ⟺ rate pair on the b_p graph
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let sig_k = random_admissible_stress_tensor(&mut rng, &p);
            let dt = rng.gen_range(0.01..1.0);
            let (rate, stress_tot) = random_flow_pair(&mut rng, &p, 1.0);
            let rate_tensor = t2_inverse(&rate);
            let sig_tot = t2_inverse(&stress_tot);
            let deps_p = rate_tensor.scale(dt);
            let dsig = sig_tot.sub(&sig_k);
            let gap_k = shifted_graph_gap(&p, &sig_k, dt, &deps_p, &dsig).value();
            let gap_rate = dp_bipotential(&p, &rate_tensor, &sig_tot).value()
                - duality(&rate_tensor, &sig_tot);
            // shifted and rate-form graph gaps vanish together
            let tol = 1e-9 * (1.0 / dt) * (1.0 + sig_k.norm());
            assert!(gap_k.abs() <= tol * dt.max(1.0) + 1e-9);
            assert!(gap_rate.abs() <= tol + 1e-9);
        }
    }

    #[test]
    fn delta_b_elastic_regime() {
        let m = moduli();
        let p = params();
        let law = IncrementalLaw::new(m, p, 0.1, SymTensor::ZERO);
        // small strain increment, elastic stress increment: split (Δε, 0)
        let deps = SymTensor::new(1e-4, -2e-5, 3e-5, 1e-5, 0.0, 0.0);
        let dsig = m.apply_s(&deps);
        let d = law.delta_b(&deps, &dsig).unwrap();
        let s = d.split.unwrap();
        assert!(s.plastic.norm() < 1e-16);
        let expected = elastic_bipotential(&m, &deps, &dsig);
        assert!((d.value.value() - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        // zero increments: value 0
        let z = law.delta_b(&SymTensor::ZERO, &SymTensor::ZERO).unwrap();
        assert_eq!(z.value.value(), 0.0);
    }

    #[test]
    fn delta_b_grad_elastic_is_s_deps() {
        let m = moduli();
        let p = params();
        let law = IncrementalLaw::new(m, p, 0.1, SymTensor::ZERO);
        let deps = SymTensor::new(1e-4, -2e-5, 3e-5, 1e-5, 0.0, 0.0);
        let dsig = m.apply_s(&deps);
        let g = law.grad_eps(&deps, &dsig).unwrap();
        assert!(g.sub(&m.apply_s(&deps)).norm() < 1e-12);
    }

    #[test]
    fn delta_b_weak_fenchel_and_growth() {
        let m = moduli();
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // growth constant: value ≤ C(‖Δε‖² + ‖Δσ‖²) with C from the moduli scale
        let big_c = 4.0 * (3.0 * m.lambda + 2.0 * m.mu)
            + 2.0 * (p.c1() + 3.0 * p.c1().powi(2)) / 1.0;
        for _ in 0..500 {
            let sig_k = random_admissible_stress_tensor(&mut rng, &p);
            let law = IncrementalLaw::new(m, p, 0.1, sig_k);
            let deps = random_sym(&mut rng, 0.01);
            let sig_tot = t2_inverse(&random_stress_in_cone(&mut rng, &p, 3.0));
            let dsig = sig_tot.sub(&sig_k);
            let d = law.delta_b(&deps, &dsig).unwrap();
            let v = d.value.value();
            assert!(v - duality(&deps, &dsig) >= -1e-10 * (1.0 + v.abs()), "weak Fenchel");
            let bound = big_c * (1.0 + deps.norm().powi(2) + dsig.norm().powi(2) + sig_k.norm().powi(2));
            assert!(v <= bound, "growth: {v} vs {bound}");
        }
    }

    #[test]
    fn delta_b_split_satisfies_pdisc_equations_on_graph() {
        // at a graph point the split satisfies the elastic law and the
        // flow condition separately
        let m = moduli();
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let sig_k = random_admissible_stress_tensor(&mut rng, &p);
            let dt = 0.1;
            let law = IncrementalLaw::new(m, p, dt, sig_k);
            // construct a graph point from a flow pair plus elastic consistency
            let (rate, stress_tot) = random_flow_pair(&mut rng, &p, 1e-3);
            let sig_tot = t2_inverse(&stress_tot);
            let dsig = sig_tot.sub(&sig_k);
            let deps_p = t2_inverse(&rate).scale(dt);
            let deps = deps_p.add(&m.apply_s_inv(&dsig));
            let gap = law.graph_gap(&deps, &dsig).unwrap().value();
            assert!(gap.abs() <= 1e-8 * (1.0 + sig_k.norm()), "graph gap {gap}");
            let d = law.delta_b(&deps, &dsig).unwrap();
            let s = d.split.unwrap();
            let elastic_gap = s.elastic.sub(&m.apply_s_inv(&dsig)).norm();
            assert!(elastic_gap <= 1e-8, "elastic-law gap {elastic_gap}");
            let flow_gap = shifted_graph_gap(&p, &sig_k, dt, &s.plastic, &dsig).value();
            assert!(flow_gap.abs() <= 1e-8 * (1.0 + sig_k.norm()), "flow gap {flow_gap}");
        }
    }

    #[test]
    fn delta_b_gradient_matches_finite_differences() {
        let m = moduli();
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = 1e-5;
        for _ in 0..30 {
            let sig_k = random_admissible_stress_tensor(&mut rng, &p);
            let law = IncrementalLaw::new(m, p, 0.1, sig_k);
            let deps = random_sym(&mut rng, 2e-3);
            let sig_tot = t2_inverse(&random_stress_in_cone(&mut rng, &p, 2.0));
            let dsig = sig_tot.sub(&sig_k);
            let g = law.grad_eps(&deps, &dsig).unwrap();
            for k in 0..6 {
                let mut dir_c = [0.0; 6];
                dir_c[k] = 1.0;
                let dir = SymTensor::from_components(dir_c);
                // five-point central stencil
                let v = |t: f64| {
                    law.delta_b(&deps.add(&dir.scale(t)), &dsig)
                        .unwrap()
                        .value
                        .value()
                };
                let fd = (-v(2.0 * h) + 8.0 * v(h) - 8.0 * v(-h) + v(-2.0 * h)) / (12.0 * h);
                let an = duality(&g, &dir);
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                    "fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn delta_b_gradient_is_dsig_on_graph() {
        let m = moduli();
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let sig_k = random_admissible_stress_tensor(&mut rng, &p);
            let law = IncrementalLaw::new(m, p, 0.25, sig_k);
            let (rate, stress_tot) = random_flow_pair(&mut rng, &p, 1e-3);
            let sig_tot = t2_inverse(&stress_tot);
            let dsig = sig_tot.sub(&sig_k);
            let deps_p = t2_inverse(&rate).scale(0.25);
            let deps = deps_p.add(&m.apply_s_inv(&dsig));
            let g = law.grad_eps(&deps, &dsig).unwrap();
            assert!(
                g.sub(&dsig).norm() <= 1e-7 * (1.0 + dsig.norm()),
                "gradient fixed-point residual {}",
                g.sub(&dsig).norm()
            );
        }
    }

    #[test]
    fn delta_b_convex_in_eps_not_in_sig() {
        let m = moduli();
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sig_k = SymTensor::ZERO;
        let law = IncrementalLaw::new(m, p, 0.1, sig_k);
        // segment convexity in Δε at fixed Δσ
        let sig_tot = t2_inverse(&random_stress_in_cone(&mut rng, &p, 1.0));
        let dsig = sig_tot.sub(&sig_k);
        for _ in 0..50 {
            let a = random_sym(&mut rng, 5e-3);
            let b = random_sym(&mut rng, 5e-3);
            let va = law.delta_b(&a, &dsig).unwrap().value.value();
            let vb = law.delta_b(&b, &dsig).unwrap().value.value();
            for i in 1..10 {
                let t = i as f64 / 10.0;
                let mid = a.scale(1.0 - t).add(&b.scale(t));
                let vm = law.delta_b(&mid, &dsig).unwrap().value.value();
                let chord = (1.0 - t) * va + t * vb;
                assert!(vm <= chord + 1e-10 * (1.0 + chord.abs()));
            }
        }
    }

    #[test]
    fn auditor_reports_delta_b_nonconvexity_in_stress() {
        // Δb_k is convex in Δε but not in Δσ, so it is not a bipotential;
        // wrapped as one, the auditor must say so (and only about the
        // second argument)
        use crate::bipotential::{axiom_audit, AuditCounts, AuditSampler, Bipotential};
        use std::sync::Arc;
        let m = moduli();
        let p = params();
        let law = IncrementalLaw::new(m, p, 0.1, SymTensor::ZERO);
        let wrapped = Bipotential::new(
            "delta_b_as_bipotential",
            move |deps: &SymTensor, dsig: &SymTensor| law.delta_b(deps, dsig).unwrap().value,
            duality,
        );
        let sampler = AuditSampler::<SymTensor, SymTensor> {
            sample_x: Arc::new(|rng| crate::sampling::random_sym(rng, 4e-3)),
            sample_y: Arc::new(move |rng| {
                t2_inverse(&crate::sampling::random_stress_in_cone(rng, &p, 2.0))
            }),
            graph_points: None,
            probes_x: Arc::new(|rng, n| {
                (0..n).map(|_| crate::sampling::random_sym(rng, 8e-3)).collect()
            }),
            probes_y: Arc::new(move |rng, n| {
                (0..n)
                    .map(|_| t2_inverse(&crate::sampling::random_stress_in_cone(rng, &p, 2.0)))
                    .collect()
            }),
        };
        let counts = AuditCounts {
            pairs: 2000,
            segments: 2000,
            graph_checks: 0,
            probes_per_check: 8,
        };
        let report = axiom_audit(&wrapped, &sampler, &counts, 5);
        assert!(report.convexity_violations_y > 0, "{}", report.to_json());
        assert_eq!(report.convexity_violations_x, 0, "{}", report.to_json());
        // the weak Fenchel inequality still holds
        assert_eq!(report.fenchel_violations, 0, "{}", report.to_json());
    }

    #[test]
    fn tangent_matches_gradient_differences() {
        let m = moduli();
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-7;
        let mut checked = 0;
        for _ in 0..200 {
            let sig_k = random_admissible_stress_tensor(&mut rng, &p);
            let law = IncrementalLaw::new(m, p, 0.1, sig_k);
            let deps = random_sym(&mut rng, 2e-3);
            let sig_tot = t2_inverse(&random_stress_in_cone(&mut rng, &p, 2.0));
            let dsig = sig_tot.sub(&sig_k);
            let (_, _, tangent) = law.full(&deps, &dsig).unwrap();
            for k in 0..6 {
                let mut dir_c = [0.0; 6];
                dir_c[k] = 1.0;
                let dir = SymTensor::from_components(dir_c);
                let (_, gp, tp) = law.full(&deps.add(&dir.scale(h)), &dsig).unwrap();
                let (_, gm, tm) = law.full(&deps.sub(&dir.scale(h)), &dsig).unwrap();
                // only compare where the region is locally stable
                if std::mem::discriminant(&tp.kind) != std::mem::discriminant(&tm.kind) {
                    continue;
                }
                let fd = gp.sub(&gm).scale(1.0 / (2.0 * h));
                let an = tangent.apply(&dir);
                let scale = 1.0 + fd.norm().max(an.norm());
                if fd.sub(&an).norm() <= 1e-4 * scale {
                    checked += 1;
                }
            }
        }
        assert!(checked > 400, "tangent agreement on {checked} stable probes");
    }
}
