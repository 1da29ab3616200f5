//! Symmetric 3×3 tensors, hydrostatic/deviatoric decompositions and the two
//! duality products they induce.
//!
//! Storage is upper-triangular with component order (11, 22, 33, 12, 13, 23).
//! All tensors carry n = 3 semantics; plane-strain states are embedded by
//! keeping the out-of-plane diagonal component and zero out-of-plane shears,
//! so the cone formulas downstream stay dimension-consistent.
//!
//! Two decompositions coexist on purpose and must not be conflated:
//! strains decompose with the mean equal to tr/3 ([`t1_strain`]), stresses
//! with the mean equal to the full trace ([`t2_stress`]). The asymmetry makes
//! `duality(eps, sig) == duality_prime(t1_strain(eps), t2_stress(sig))` an
//! exact algebraic identity.

use serde::{Deserialize, Serialize};

/// Symmetric 3×3 tensor, components ordered (11, 22, 33, 12, 13, 23).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymTensor {
    comps: [f64; 6],
}

impl SymTensor {
    pub const ZERO: SymTensor = SymTensor { comps: [0.0; 6] };

    /// Identity tensor I₃.
    pub const IDENTITY: SymTensor = SymTensor {
        comps: [1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
    };

    pub fn new(c11: f64, c22: f64, c33: f64, c12: f64, c13: f64, c23: f64) -> Self {
        SymTensor {
            comps: [c11, c22, c33, c12, c13, c23],
        }
    }

    pub fn from_components(comps: [f64; 6]) -> Self {
        SymTensor { comps }
    }

    pub fn diag(c11: f64, c22: f64, c33: f64) -> Self {
        SymTensor::new(c11, c22, c33, 0.0, 0.0, 0.0)
    }

    /// Embeds a plane-strain state: in-plane components given, out-of-plane
    /// diagonal `c33` explicit, out-of-plane shears zero.
    pub fn from_plane(c11: f64, c22: f64, c33: f64, c12: f64) -> Self {
        SymTensor::new(c11, c22, c33, c12, 0.0, 0.0)
    }

    pub fn components(&self) -> [f64; 6] {
        self.comps
    }

    pub fn trace(&self) -> f64 {
        self.comps[0] + self.comps[1] + self.comps[2]
    }

    /// Trace-free part: self − (tr/3)·I.
    pub fn deviator(&self) -> SymTensor {
        let m = self.trace() / 3.0;
        SymTensor::new(
            self.comps[0] - m,
            self.comps[1] - m,
            self.comps[2] - m,
            self.comps[3],
            self.comps[4],
            self.comps[5],
        )
    }

    /// Frobenius norm √⟨a,a⟩ (off-diagonals weighted twice).
    pub fn norm(&self) -> f64 {
        duality(self, self).sqrt()
    }

    pub fn add(&self, other: &SymTensor) -> SymTensor {
        let mut c = [0.0; 6];
        for i in 0..6 {
            c[i] = self.comps[i] + other.comps[i];
        }
        SymTensor { comps: c }
    }

    pub fn sub(&self, other: &SymTensor) -> SymTensor {
        let mut c = [0.0; 6];
        for i in 0..6 {
            c[i] = self.comps[i] - other.comps[i];
        }
        SymTensor { comps: c }
    }

    pub fn scale(&self, a: f64) -> SymTensor {
        let mut c = [0.0; 6];
        for i in 0..6 {
            c[i] = a * self.comps[i];
        }
        SymTensor { comps: c }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.is_finite())
    }
}

/// Point of ℝ × Sym₀(3): a mean scalar plus a trace-free deviator.
///
/// The constructor re-projects the deviatoric argument onto the trace-free
/// subspace, so the tracelessness invariant holds by construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HydroDevPair {
    pub mean: f64,
    dev: SymTensor,
}

impl HydroDevPair {
    pub const ZERO: HydroDevPair = HydroDevPair {
        mean: 0.0,
        dev: SymTensor::ZERO,
    };

    pub fn new(mean: f64, dev: SymTensor) -> Self {
        HydroDevPair {
            mean,
            dev: dev.deviator(),
        }
    }

    pub fn dev(&self) -> &SymTensor {
        &self.dev
    }

    pub fn dev_norm(&self) -> f64 {
        self.dev.norm()
    }

    /// Euclidean norm of the pair, √(mean² + ‖dev‖²).
    pub fn norm(&self) -> f64 {
        (self.mean * self.mean + duality(&self.dev, &self.dev)).sqrt()
    }

    pub fn add(&self, other: &HydroDevPair) -> HydroDevPair {
        HydroDevPair {
            mean: self.mean + other.mean,
            dev: self.dev.add(&other.dev),
        }
    }

    pub fn sub(&self, other: &HydroDevPair) -> HydroDevPair {
        HydroDevPair {
            mean: self.mean - other.mean,
            dev: self.dev.sub(&other.dev),
        }
    }

    pub fn scale(&self, a: f64) -> HydroDevPair {
        HydroDevPair {
            mean: a * self.mean,
            dev: self.dev.scale(a),
        }
    }
}

/// T₁: strain decomposition, mean = tr ε / 3, dev = ε − (tr ε / 3)·I.
pub fn t1_strain(eps: &SymTensor) -> HydroDevPair {
    HydroDevPair {
        mean: eps.trace() / 3.0,
        dev: eps.deviator(),
    }
}

/// Inverse of [`t1_strain`]: ε = mean·I + dev.
pub fn t1_inverse(pair: &HydroDevPair) -> SymTensor {
    SymTensor::IDENTITY.scale(pair.mean).add(&pair.dev)
}

/// T₂: stress decomposition, mean = tr σ (not divided by 3), dev = σ − (tr σ / 3)·I.
pub fn t2_stress(sig: &SymTensor) -> HydroDevPair {
    HydroDevPair {
        mean: sig.trace(),
        dev: sig.deviator(),
    }
}

/// Inverse of [`t2_stress`]: σ = (mean/3)·I + dev.
pub fn t2_inverse(pair: &HydroDevPair) -> SymTensor {
    SymTensor::IDENTITY.scale(pair.mean / 3.0).add(&pair.dev)
}

/// ⟨ε, σ⟩ = tr(εσ). Off-diagonal products carry weight 2. Symmetric, bilinear.
pub fn duality(eps: &SymTensor, sig: &SymTensor) -> f64 {
    let a = eps.comps;
    let b = sig.comps;
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + 2.0 * (a[3] * b[3] + a[4] * b[4] + a[5] * b[5])
}

/// ⟨(e_m, e), (s_m, s)⟩′ = e_m·s_m + ⟨e, s⟩.
pub fn duality_prime(a: &HydroDevPair, b: &HydroDevPair) -> f64 {
    a.mean * b.mean + duality(&a.dev, &b.dev)
}
