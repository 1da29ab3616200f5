//! The two constitutive laws: isotropic elasticity as a separable quadratic
//! bipotential, and non-associated Drücker-Prager plasticity as a
//! non-separable one, in both coordinate systems.
//!
//! Coordinate conventions (these carry the whole module, see also `tensor`):
//! - `dp_bipotential_prime` lives on abstract (mean, dev) pairs with cones
//!   K′_strain = {k_d·tanθ·‖e‖ ≤ e_m} and K′_stress = {(1/k_d)‖s‖ + s_m·tanφ ≤ c},
//!   paired by ⟨·,·⟩′. Physical rates enter through `t1_strain`, stresses
//!   through `t2_stress`.
//! - `dp_bipotential` lives on tensor pairs with the tr(εσ) pairing; its
//!   strain argument decomposes in trace form (mean = tr ε, not tr ε/3),
//!   which is what makes its −(1−1/n)(tr ε)(tr σ) coupling term exact.

use crate::bipotential::Bipotential;
use crate::convex::{ExtendedReal, MetricWeights, SecondOrderCone};
use crate::tensor::{duality, duality_prime, t2_inverse, t2_stress, HydroDevPair, SymTensor};
use crate::Error;
use serde::{Deserialize, Serialize};

/// Isotropic elasticity: Sε = λ(tr ε)I + 2με.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ElasticModuli {
    pub lambda: f64,
    pub mu: f64,
}

impl ElasticModuli {
    pub fn new(lambda: f64, mu: f64) -> Result<Self, Error> {
        let m = ElasticModuli { lambda, mu };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(3.0 * self.lambda + 2.0 * self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "3λ + 2μ must be > 0 for a positive definite S, got λ={}, μ={}",
                self.lambda, self.mu
            )));
        }
        Ok(())
    }

    /// Bulk modulus K = λ + 2μ/3.
    pub fn bulk(&self) -> f64 {
        self.lambda + 2.0 * self.mu / 3.0
    }

    /// Sε = λ(tr ε)I + 2με.
    pub fn apply_s(&self, eps: &SymTensor) -> SymTensor {
        SymTensor::IDENTITY
            .scale(self.lambda * eps.trace())
            .add(&eps.scale(2.0 * self.mu))
    }

    /// S⁻¹σ = (σ − λ/(3λ+2μ)(tr σ)I) / (2μ).
    pub fn apply_s_inv(&self, sig: &SymTensor) -> SymTensor {
        let d = 3.0 * self.lambda + 2.0 * self.mu;
        sig.sub(&SymTensor::IDENTITY.scale(self.lambda * sig.trace() / d))
            .scale(1.0 / (2.0 * self.mu))
    }

    /// ½⟨ε, Sε⟩.
    pub fn strain_energy(&self, eps: &SymTensor) -> f64 {
        0.5 * duality(eps, &self.apply_s(eps))
    }

    /// ½⟨S⁻¹σ, σ⟩.
    pub fn stress_energy(&self, sig: &SymTensor) -> f64 {
        0.5 * duality(&self.apply_s_inv(sig), sig)
    }

    /// S as block-diagonal weights in the (tr/3, dev) strain chart:
    /// ½⟨ε, Sε⟩ = ½·3(3λ+2μ)·e_m² + ½·2μ·‖e‖².
    pub fn metric_weights(&self) -> MetricWeights {
        MetricWeights::new(3.0 * (3.0 * self.lambda + 2.0 * self.mu), 2.0 * self.mu)
    }
}

/// Drücker-Prager material data. Angles in radians.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DruckerPragerParams {
    /// Cohesion, > 0.
    pub c: f64,
    /// Friction angle, in (0, π/2).
    pub phi: f64,
    /// Dilatancy angle, in [0, phi]; θ = φ is the associated case.
    pub theta: f64,
    /// Cone-shape constant, > 0.
    pub k_d: f64,
}

impl DruckerPragerParams {
    pub fn new(c: f64, phi: f64, theta: f64, k_d: f64) -> Result<Self, Error> {
        let p = DruckerPragerParams { c, phi, theta, k_d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidParameter(format!("cohesion must be > 0, got {}", self.c)));
        }
        if !(self.phi > 0.0 && self.phi < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "friction angle must lie in (0, π/2), got {}",
                self.phi
            )));
        }
        if !(self.theta >= 0.0 && self.theta <= self.phi) {
            return Err(Error::InvalidParameter(format!(
                "dilatancy angle must satisfy 0 ≤ θ ≤ φ, got θ={}, φ={}",
                self.theta, self.phi
            )));
        }
        if !(self.k_d > 0.0) {
            return Err(Error::InvalidParameter(format!("k_d must be > 0, got {}", self.k_d)));
        }
        Ok(())
    }

    /// C₁ = c / tan φ (also the apex mean stress).
    pub fn c1(&self) -> f64 {
        self.c / self.phi.tan()
    }

    /// C₂ = k_d(tan θ − tan φ) ≤ 0.
    pub fn c2(&self) -> f64 {
        self.k_d * (self.theta.tan() - self.phi.tan())
    }

    /// K′_stress: (1/k_d)‖s‖ + s_m·tan φ ≤ c in the (tr σ, dev σ) chart.
    pub fn stress_cone(&self) -> SecondOrderCone {
        SecondOrderCone::StressForm {
            a: 1.0 / self.k_d,
            t: self.phi.tan(),
            c0: self.c,
        }
    }

    /// K′_strain: k_d·tan θ·‖e‖ ≤ e_m.
    pub fn strain_cone(&self) -> SecondOrderCone {
        SecondOrderCone::StrainForm {
            beta: self.k_d * self.theta.tan(),
        }
    }
}

/// b_e(εᵉ, σ) = ½⟨εᵉ, Sεᵉ⟩ + ½⟨S⁻¹σ, σ⟩. Always finite; ≥ ⟨εᵉ, σ⟩ with
/// equality iff σ = Sεᵉ.
pub fn elastic_bipotential(moduli: &ElasticModuli, eps_e: &SymTensor, sig: &SymTensor) -> f64 {
    moduli.strain_energy(eps_e) + moduli.stress_energy(sig)
}

/// Exact membership test of a T₂ stress pair in K′_stress.
pub fn k_stress_contains(params: &DruckerPragerParams, pair: &HydroDevPair) -> bool {
    params.stress_cone().contains(pair)
}

/// Exact membership test of a rate pair in K′_strain.
pub fn k_strain_contains(params: &DruckerPragerParams, pair: &HydroDevPair) -> bool {
    params.strain_cone().contains(pair)
}

/// Relative ulp-class guard on the constitutive domain tests: membership of
/// a point produced by exact-arithmetic constructions (projections, graph
/// parameterizations, solver updates) must not flip to +∞ across an f64
/// reconstruction chain. Far below every tested violation scale (≥ 1e-9).
const DOMAIN_SLACK: f64 = 1e-13;

pub(crate) fn stress_in_domain(params: &DruckerPragerParams, pair: &HydroDevPair) -> bool {
    let r = pair.dev_norm();
    let lhs = r / params.k_d + pair.mean * params.phi.tan();
    let scale = params.c + r / params.k_d + (pair.mean * params.phi.tan()).abs();
    lhs <= params.c + DOMAIN_SLACK * scale
}

pub(crate) fn strain_in_domain(params: &DruckerPragerParams, pair: &HydroDevPair) -> bool {
    let beta = params.k_d * params.theta.tan();
    let lhs = beta * pair.dev_norm();
    let scale = 1.0 + lhs + pair.mean.abs();
    lhs <= pair.mean + DOMAIN_SLACK * scale
}

/// b′_p((e_m, e), (s_m, s)) = C₁e_m + C₂(s_m − c/tanφ)‖e‖ on
/// K′_strain × K′_stress, +∞ outside.
pub fn dp_bipotential_prime(
    params: &DruckerPragerParams,
    strain_rate: &HydroDevPair,
    stress: &HydroDevPair,
) -> ExtendedReal {
    if !stress_in_domain(params, stress) || !strain_in_domain(params, strain_rate) {
        return ExtendedReal::INFINITY;
    }
    ExtendedReal::finite(
        params.c1() * strain_rate.mean
            + params.c2() * (stress.mean - params.c1()) * strain_rate.dev_norm(),
    )
}

/// b_p(ε, σ): the same law on tensor pairs with the tr(εσ) pairing
/// (trace-form strain coordinates, see module docs). n = 3 only.
pub fn dp_bipotential(
    params: &DruckerPragerParams,
    eps: &SymTensor,
    sig: &SymTensor,
) -> ExtendedReal {
    let stress_pair = t2_stress(sig);
    let strain_trace_pair = HydroDevPair::new(eps.trace(), eps.deviator());
    if !stress_in_domain(params, &stress_pair) || !strain_in_domain(params, &strain_trace_pair) {
        return ExtendedReal::INFINITY;
    }
    let tr_e = eps.trace();
    let tr_s = sig.trace();
    let dev_norm = eps.deviator().norm();
    ExtendedReal::finite(
        params.c1() * tr_e + params.c2() * (tr_s - params.c1()) * dev_norm
            - (1.0 - 1.0 / 3.0) * tr_e * tr_s,
    )
}

/// Distance of the shifted rate pair (ė_m + k_d(tanφ − tanθ)‖ė‖, ė) from the
/// normal cone of K′_stress at the given stress. Zero iff the flow rule holds.
pub fn flow_rule_residual(
    params: &DruckerPragerParams,
    strain_rate: &HydroDevPair,
    stress: &HydroDevPair,
) -> Result<f64, Error> {
    if !stress_in_domain(params, stress) {
        return Err(Error::InvalidParameter(
            "flow_rule_residual: stress outside K'_stress".into(),
        ));
    }
    let tan_phi = params.phi.tan();
    let shift = params.k_d * (tan_phi - params.theta.tan()) * strain_rate.dev_norm();
    let z = HydroDevPair::new(strain_rate.mean + shift, *strain_rate.dev());
    let s_norm = stress.dev_norm();
    let slack = params.c - s_norm / params.k_d - stress.mean * tan_phi;
    let scale = 1.0 + stress.mean.abs() + s_norm;
    let boundary_tol = 1e-10 * scale;
    if slack > boundary_tol {
        // interior: normal cone is {0}
        return Ok(z.norm());
    }
    if s_norm > boundary_tol {
        // smooth face: normal ray μ(tan φ, ŝ/k_d), μ ≥ 0
        let n = HydroDevPair::new(tan_phi, stress.dev().scale(1.0 / (params.k_d * s_norm)));
        let mu = (duality_prime(&z, &n) / duality_prime(&n, &n)).max(0.0);
        return Ok(z.sub(&n.scale(mu)).norm());
    }
    // apex: normal cone is {k_d·tanφ·‖n_d‖ ≤ n_m}
    let apex_cone = SecondOrderCone::StrainForm {
        beta: params.k_d * tan_phi,
    };
    let proj = apex_cone.project(&z, &MetricWeights::UNIT);
    Ok(z.sub(&proj).norm())
}

/// Euclidean projection of a stress tensor onto K_stress, snapped so the
/// exact membership test holds on the reconstructed tensor.
///
/// ‖σ‖²_F = s_m²/3 + ‖s‖² in the (tr σ, dev σ) chart, so the Euclidean tensor
/// projection is the weighted chart projection with weights (1/3, 1).
pub fn project_stress(params: &DruckerPragerParams, sig: &SymTensor) -> SymTensor {
    let pair = t2_stress(sig);
    if k_stress_contains(params, &pair) {
        return *sig;
    }
    let w = MetricWeights::new(1.0 / 3.0, 1.0);
    let mut proj = params.stress_cone().project(&pair, &w);
    for _ in 0..8 {
        let out = t2_inverse(&proj);
        if k_stress_contains(params, &t2_stress(&out)) {
            return out;
        }
        proj = HydroDevPair::new(proj.mean, proj.dev().scale(1.0 - 4.0 * f64::EPSILON));
    }
    // deviator shrinking failed (mean-side rounding): land strictly inside on the axis
    t2_inverse(&HydroDevPair::new(
        proj.mean.min(params.c1() * (1.0 - 1e-12)),
        SymTensor::ZERO,
    ))
}

/// Inputs of [`constitutive_inclusions_check`]: a full local state with its
/// plastic rate in the (tr/3, dev) chart.
#[derive(Clone, Copy, Debug)]
pub struct ConstitutiveState {
    pub eps: SymTensor,
    pub eps_e: SymTensor,
    pub eps_p: SymTensor,
    pub rate_p: HydroDevPair,
    pub sig: SymTensor,
}

/// Margins of the three constitutive relations at one state.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ConstitutiveReport {
    /// ‖ε − εᵉ − εᵖ‖.
    pub decomposition_residual: f64,
    /// b_e − ⟨εᵉ, σ⟩ = ½⟨εᵉ − S⁻¹σ, S(εᵉ − S⁻¹σ)⟩.
    pub elastic_gap: f64,
    /// b′_p − ⟨·,·⟩′ at (rate_p, T₂σ); +∞ when a cone is violated.
    pub plastic_gap: ExtendedReal,
    pub pass: bool,
}

pub fn constitutive_inclusions_check(
    moduli: &ElasticModuli,
    params: &DruckerPragerParams,
    state: &ConstitutiveState,
    tol: f64,
) -> ConstitutiveReport {
    let decomposition_residual = state.eps.sub(&state.eps_e).sub(&state.eps_p).norm();
    let elastic_gap =
        elastic_bipotential(moduli, &state.eps_e, &state.sig) - duality(&state.eps_e, &state.sig);
    let stress_pair = t2_stress(&state.sig);
    let plastic_gap = match dp_bipotential_prime(params, &state.rate_p, &stress_pair)
        .finite_value()
    {
        Some(v) => ExtendedReal::finite(v - duality_prime(&state.rate_p, &stress_pair)),
        None => ExtendedReal::INFINITY,
    };
    let pass = decomposition_residual <= tol
        && elastic_gap.abs() <= tol * (1.0 + state.sig.norm().powi(2))
        && matches!(plastic_gap.finite_value(), Some(g) if g.abs() <= tol * (1.0 + state.sig.norm()));
    ConstitutiveReport {
        decomposition_residual,
        elastic_gap,
        plastic_gap,
        pass,
    }
}

/// Analytic flow pair on the smooth face of the yield surface:
/// stress (s_m, ‖s‖ = k_d(c − s_m·tanφ)·ŝ), rate (λ·tanθ, (λ/k_d)·ŝ).
/// Both lie on the graph of b′_p for any λ ≥ 0, s_m ≤ c/tanφ.
pub fn flow_pair(
    params: &DruckerPragerParams,
    lambda: f64,
    s_hat: &SymTensor,
    s_m: f64,
) -> (HydroDevPair, HydroDevPair) {
    debug_assert!(lambda >= 0.0);
    debug_assert!((s_hat.norm() - 1.0).abs() < 1e-9);
    let s_norm = params.k_d * (params.c - s_m * params.phi.tan());
    debug_assert!(s_norm >= 0.0, "s_m beyond the apex");
    // nudge both points one shade inside their cones so exact membership
    // survives tensor reconstruction (1e-12 relative ≪ the 1e-9 graph tol)
    const MARGIN: f64 = 1e-12;
    let stress = HydroDevPair::new(s_m, s_hat.scale(s_norm * (1.0 - MARGIN)));
    let rate = HydroDevPair::new(
        lambda * params.theta.tan() * (1.0 + MARGIN) + lambda * MARGIN,
        s_hat.scale(lambda / params.k_d),
    );
    (rate, stress)
}

/// b_e as an auditable object on tensor pairs.
pub fn elastic_bipotential_object(moduli: ElasticModuli) -> Bipotential<SymTensor, SymTensor> {
    Bipotential::new(
        "b_e",
        move |eps: &SymTensor, sig: &SymTensor| {
            ExtendedReal::finite(elastic_bipotential(&moduli, eps, sig))
        },
        duality,
    )
}

/// b′_p as an auditable object on (mean, dev) pairs with the primed pairing.
pub fn dp_bipotential_prime_object(
    params: DruckerPragerParams,
) -> Bipotential<HydroDevPair, HydroDevPair> {
    Bipotential::new(
        "b_p_prime",
        move |x: &HydroDevPair, y: &HydroDevPair| dp_bipotential_prime(&params, x, y),
        duality_prime,
    )
    .with_domains(
        move |x: &HydroDevPair| k_strain_contains(&params, x),
        move |y: &HydroDevPair| k_stress_contains(&params, y),
    )
}

/// b_p (trace-form coordinates) as an auditable object on tensor pairs.
pub fn dp_bipotential_object(params: DruckerPragerParams) -> Bipotential<SymTensor, SymTensor> {
    Bipotential::new(
        "b_p",
        move |eps: &SymTensor, sig: &SymTensor| dp_bipotential(&params, eps, sig),
        duality,
    )
    .with_domains(
        move |eps: &SymTensor| {
            k_strain_contains(&params, &HydroDevPair::new(eps.trace(), eps.deviator()))
        },
        move |sig: &SymTensor| k_stress_contains(&params, &t2_stress(sig)),
    )
}
