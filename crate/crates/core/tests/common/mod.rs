//! Shared oracles for the acceptance suite. Everything here is independent
//! of the library's solution paths: classical return mapping for the
//! associated limit, and nested golden-section searches for inf-convolution
//! values.

use bipotential::{
    duality, shifted_plastic_bipotential, t1_strain, DruckerPragerParams, ElasticModuli,
    HydroDevPair, SymTensor,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Classical predictor-corrector Drücker-Prager return mapping (backward
/// Euler, radial in the deviator), tensor-level flow with tr Δεᵖ = λ·tanθ.
pub fn radial_return(
    moduli: &ElasticModuli,
    params: &DruckerPragerParams,
    sig_k: &SymTensor,
    deps: &SymTensor,
) -> SymTensor {
    let trial = sig_k.add(&moduli.apply_s(deps));
    let tan_phi = params.phi.tan();
    let tan_theta = params.theta.tan();
    let s_trial = trial.deviator();
    let s_norm = s_trial.norm();
    let f_trial = s_norm / params.k_d + tan_phi * trial.trace() - params.c;
    if f_trial <= 0.0 {
        return trial;
    }
    let bulk = moduli.bulk();
    let two_mu = 2.0 * moduli.mu;
    let denom = two_mu / (params.k_d * params.k_d) + 3.0 * bulk * tan_phi * tan_theta;
    let lambda = f_trial / denom;
    let s_new = s_norm - two_mu * lambda / params.k_d;
    if s_new >= 0.0 && s_norm > 0.0 {
        let tr_new = trial.trace() - 3.0 * bulk * lambda * tan_theta;
        SymTensor::IDENTITY
            .scale(tr_new / 3.0)
            .add(&s_trial.scale(s_new / s_norm))
    } else {
        // apex return: tr σ = c/tanφ, zero deviator
        SymTensor::IDENTITY.scale(params.c1() / 3.0)
    }
}

fn golden(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..220 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
        if (hi - lo).abs() < 1e-13 * (1.0 + lo.abs() + hi.abs()) {
            break;
        }
    }
    fc.min(fd)
}

/// Brute-force value of Δb_k(Δε, Δσ) by nested golden-section over the
/// reduced coordinates (mean, ‖dev‖) of the plastic split, evaluating the
/// full objective b_e + b_{p,k} through the library's audited evaluators.
/// The optimal deviator direction is toward W_D·dev(Δε) + dev(σ_k), derived
/// from the objective's dev-dependent terms alone.
pub fn delta_b_oracle(
    moduli: &ElasticModuli,
    params: &DruckerPragerParams,
    sig_k: &SymTensor,
    dt: f64,
    deps: &SymTensor,
    dsig: &SymTensor,
) -> f64 {
    let e_pair = t1_strain(deps);
    let w_d = 2.0 * moduli.mu;
    let center = e_pair.dev().scale(w_d).add(&sig_k.deviator());
    let dir = if center.norm() > 0.0 {
        center.scale(1.0 / center.norm())
    } else {
        SymTensor::ZERO
    };
    let objective = |w_m: f64, rho: f64| -> f64 {
        // plastic split candidate in T₁ strain coordinates
        let w = SymTensor::IDENTITY.scale(w_m).add(&dir.scale(rho));
        let elastic = deps.sub(&w);
        let b_e = bipotential::elastic_bipotential(moduli, &elastic, dsig);
        let b_pk = shifted_plastic_bipotential(params, sig_k, dt, &w, dsig);
        b_e + b_pk.value()
    };
    let beta = params.k_d * params.theta.tan();
    let span = 8.0 * (1.0 + deps.norm() + sig_k.norm() / moduli.mu);
    let outer = |w_m: f64| -> f64 {
        if w_m < 0.0 {
            return f64::INFINITY;
        }
        // strain cone on the trace-form pair: k_d·tanθ·ρ ≤ 3·w_m
        let hi = if beta > 0.0 { (3.0 * w_m / beta).min(span) } else { span };
        golden(0.0, hi, |rho| objective(w_m, rho))
    };
    golden(-0.1 * span, span, outer)
}

pub fn random_unit_dev(rng: &mut ChaCha8Rng) -> SymTensor {
    loop {
        let mut c = [0.0; 6];
        for v in &mut c {
            *v = rng.gen_range(-1.0..1.0);
        }
        let d = SymTensor::from_components(c).deviator();
        if d.norm() > 1e-6 {
            return d.scale(1.0 / d.norm());
        }
    }
}

/// ⟨·,·⟩′ shorthand for pair points.
pub fn pairing_prime(a: &HydroDevPair, b: &HydroDevPair) -> f64 {
    a.mean * b.mean + duality(a.dev(), b.dev())
}
