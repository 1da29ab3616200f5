//! Deterministic samplers for the material domains: random tensors, random
//! points of the admissible cones, analytic flow pairs, and ready-made
//! [`AuditSampler`]s for the four audited bipotentials.
//!
//! Everything is driven by a caller-seeded ChaCha stream so audits and CLI
//! runs are reproducible bit for bit.

use crate::bipotential::AuditSampler;
use crate::materials::{flow_pair, DruckerPragerParams, ElasticModuli};
use crate::tensor::{t2_inverse, HydroDevPair, SymTensor};
use crate::timestepping::shifted_plastic_bipotential_object;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Random symmetric tensor with components in (−scale, scale).
pub fn random_sym(rng: &mut ChaCha8Rng, scale: f64) -> SymTensor {
    let mut c = [0.0; 6];
    for v in &mut c {
        *v = rng.gen_range(-scale..scale);
    }
    SymTensor::from_components(c)
}

/// Random trace-free tensor of norm up to ~scale.
pub fn random_dev(rng: &mut ChaCha8Rng, scale: f64) -> SymTensor {
    random_sym(rng, scale).deviator()
}

/// Random unit-norm deviator.
pub fn random_unit_dev(rng: &mut ChaCha8Rng) -> SymTensor {
    loop {
        let d = random_dev(rng, 1.0);
        if d.norm() > 1e-6 {
            return d.scale(1.0 / d.norm());
        }
    }
}

/// Random point of K′_stress: s_m uniform in [−span·c/tanφ, c/tanφ], deviator
/// radius a uniform fraction of the admissible bound.
pub fn random_stress_in_cone(
    rng: &mut ChaCha8Rng,
    params: &DruckerPragerParams,
    span: f64,
) -> HydroDevPair {
    let c1 = params.c1();
    let s_m = rng.gen_range(-span * c1..c1);
    let r_max = params.k_d * (params.c - s_m * params.phi.tan());
    let r = rng.gen_range(0.0..1.0) * r_max;
    HydroDevPair::new(s_m, random_unit_dev(rng).scale(r))
}

/// Random point of K′_strain with mean up to `scale`.
pub fn random_rate_in_cone(
    rng: &mut ChaCha8Rng,
    params: &DruckerPragerParams,
    scale: f64,
) -> HydroDevPair {
    let beta = params.k_d * params.theta.tan();
    let mean = rng.gen_range(0.0..scale);
    let r_max = if beta > 0.0 { mean / beta } else { scale };
    let r = rng.gen_range(0.0..1.0) * r_max;
    HydroDevPair::new(mean, random_unit_dev(rng).scale(r))
}

/// Random analytic flow pair (rate, stress) with λ up to `lambda_max`.
pub fn random_flow_pair(
    rng: &mut ChaCha8Rng,
    params: &DruckerPragerParams,
    lambda_max: f64,
) -> (HydroDevPair, HydroDevPair) {
    let lambda = rng.gen_range(0.0..lambda_max);
    let s_m = rng.gen_range(-3.0 * params.c1()..params.c1());
    let shat = random_unit_dev(rng);
    flow_pair(params, lambda, &shat, s_m)
}

/// Sampler for the elastic bipotential on tensor pairs.
pub fn elastic_sampler(moduli: ElasticModuli, scale: f64) -> AuditSampler<SymTensor, SymTensor> {
    AuditSampler {
        sample_x: Arc::new(move |rng| random_sym(rng, scale)),
        sample_y: Arc::new(move |rng| random_sym(rng, scale * moduli.mu)),
        graph_points: Some(Arc::new(move |rng| {
            let eps = random_sym(rng, scale);
            let sig = moduli.apply_s(&eps);
            (eps, sig)
        })),
        probes_x: Arc::new(move |rng, n| (0..n).map(|_| random_sym(rng, 2.0 * scale)).collect()),
        probes_y: Arc::new(move |rng, n| {
            (0..n).map(|_| random_sym(rng, 2.0 * scale * moduli.mu)).collect()
        }),
    }
}

/// Sampler for b′_p on (mean, dev) pairs. In-cone samples with occasional
/// out-of-domain excursions (which the audit skips for the inequality and
/// flags only if they break convexity bookkeeping).
pub fn dp_prime_sampler(
    params: DruckerPragerParams,
    scale: f64,
) -> AuditSampler<HydroDevPair, HydroDevPair> {
    AuditSampler {
        sample_x: Arc::new(move |rng| random_rate_in_cone(rng, &params, scale)),
        sample_y: Arc::new(move |rng| random_stress_in_cone(rng, &params, 3.0)),
        graph_points: Some(Arc::new(move |rng| {
            match rng.gen_range(0..3) {
                0 => (HydroDevPair::ZERO, random_stress_in_cone(rng, &params, 3.0)),
                1 => {
                    // apex stress, any admissible rate
                    let apex = HydroDevPair::new(params.c1(), SymTensor::ZERO);
                    (random_rate_in_cone(rng, &params, scale), apex)
                }
                _ => random_flow_pair(rng, &params, scale),
            }
        })),
        probes_x: Arc::new(move |rng, n| {
            (0..n).map(|_| random_rate_in_cone(rng, &params, 2.0 * scale)).collect()
        }),
        probes_y: Arc::new(move |rng, n| {
            (0..n).map(|_| random_stress_in_cone(rng, &params, 4.0)).collect()
        }),
    }
}

/// Sampler for b_p on tensor pairs (trace-form strain coordinates).
pub fn dp_sampler(params: DruckerPragerParams, scale: f64) -> AuditSampler<SymTensor, SymTensor> {
    AuditSampler {
        sample_x: Arc::new(move |rng| t2_inverse(&random_rate_in_cone(rng, &params, scale))),
        sample_y: Arc::new(move |rng| t2_inverse(&random_stress_in_cone(rng, &params, 3.0))),
        graph_points: Some(Arc::new(move |rng| {
            let (rate, stress) = random_flow_pair(rng, &params, scale);
            (t2_inverse(&rate), t2_inverse(&stress))
        })),
        probes_x: Arc::new(move |rng, n| {
            (0..n)
                .map(|_| t2_inverse(&random_rate_in_cone(rng, &params, 2.0 * scale)))
                .collect()
        }),
        probes_y: Arc::new(move |rng, n| {
            (0..n)
                .map(|_| t2_inverse(&random_stress_in_cone(rng, &params, 4.0)))
                .collect()
        }),
    }
}

/// Sampler for one member b_{p,k} of the shifted family, at a given previous
/// stress σ_k ∈ K_stress and step length Δt.
pub fn shifted_sampler(
    params: DruckerPragerParams,
    sig_k: SymTensor,
    dt: f64,
    scale: f64,
) -> AuditSampler<SymTensor, SymTensor> {
    let strain_sample = move |rng: &mut ChaCha8Rng| -> SymTensor {
        t2_inverse(&random_rate_in_cone(rng, &params, scale)).scale(dt)
    };
    let stress_sample = move |rng: &mut ChaCha8Rng| -> SymTensor {
        t2_inverse(&random_stress_in_cone(rng, &params, 3.0)).sub(&sig_k)
    };
    AuditSampler {
        sample_x: Arc::new(strain_sample),
        sample_y: Arc::new(stress_sample),
        graph_points: Some(Arc::new(move |rng| {
            let (rate, stress_tot) = random_flow_pair(rng, &params, scale);
            let deps_p = t2_inverse(&rate).scale(dt);
            let dsig = t2_inverse(&stress_tot).sub(&sig_k);
            (deps_p, dsig)
        })),
        probes_x: Arc::new(move |rng, n| (0..n).map(|_| strain_sample(rng)).collect()),
        probes_y: Arc::new(move |rng, n| (0..n).map(|_| stress_sample(rng)).collect()),
    }
}

/// Random σ_k ∈ K_stress as a tensor, for sampling the b_{p,k} family.
pub fn random_admissible_stress_tensor(
    rng: &mut ChaCha8Rng,
    params: &DruckerPragerParams,
) -> SymTensor {
    t2_inverse(&random_stress_in_cone(rng, params, 3.0))
}

/// Convenience: b_{p,k} audit object plus its sampler for random (σ_k, Δt).
pub fn shifted_family_member(
    params: DruckerPragerParams,
    rng: &mut ChaCha8Rng,
    scale: f64,
) -> (
    crate::bipotential::Bipotential<SymTensor, SymTensor>,
    AuditSampler<SymTensor, SymTensor>,
) {
    let sig_k = random_admissible_stress_tensor(rng, &params);
    let dt = rng.gen_range(1e-3..1.0);
    let b = shifted_plastic_bipotential_object(params, sig_k, dt);
    let sampler = shifted_sampler(params, sig_k, dt, scale);
    (b, sampler)
}
