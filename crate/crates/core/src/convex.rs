//! Convex-analysis primitives: extended reals, second-order cones in the
//! (mean, deviator) chart, weighted cone projections, proximal maps in an
//! elasticity-induced metric and desk-scale inf-convolution.
//!
//! Every nonsmooth function this crate manipulates is isotropic in the
//! deviatoric argument, so proximal problems reduce to two scalar variables
//! (mean, ‖dev‖). The reduced problem is a weighted projection onto a planar
//! wedge and is solved in closed form by enumerating the wedge's two edges
//! and apex. No iteration, no tolerance: the only inexactness is f64
//! rounding, which the cone-snap helpers absorb.

use crate::tensor::{duality, HydroDevPair, SymTensor};
use crate::Error;
use serde::{Deserialize, Serialize};

/// ℝ ∪ {+∞}. Never −∞, never NaN; addition saturates at +∞.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ExtendedReal(f64);

impl ExtendedReal {
    pub const INFINITY: ExtendedReal = ExtendedReal(f64::INFINITY);
    pub const ZERO: ExtendedReal = ExtendedReal(0.0);

    /// Wraps a finite value. Panics on NaN or ±∞.
    pub fn finite(v: f64) -> Self {
        assert!(v.is_finite(), "ExtendedReal::finite given {v}");
        ExtendedReal(v)
    }

    /// Wraps a value that may be +∞. Panics on NaN or −∞.
    pub fn from_f64(v: f64) -> Self {
        assert!(!v.is_nan() && v != f64::NEG_INFINITY, "ExtendedReal given {v}");
        ExtendedReal(v)
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    /// Inner value; +∞ maps to `f64::INFINITY`.
    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn finite_value(&self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }
}

impl std::ops::Add for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        ExtendedReal::from_f64(self.0 + rhs.0)
    }
}

impl std::ops::Add<f64> for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: f64) -> ExtendedReal {
        ExtendedReal::from_f64(self.0 + rhs)
    }
}

impl std::fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_finite() {
            write!(f, "{}", self.0)
        } else {
            write!(f, "+inf")
        }
    }
}

/// Second-order cone in the (mean, dev) chart of [`HydroDevPair`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub enum SecondOrderCone {
    /// β‖dev‖ ≤ mean, β ≥ 0. Apex at the origin, axis +mean.
    StrainForm { beta: f64 },
    /// a‖dev‖ + t·mean ≤ c0, a > 0, t > 0. Apex at (c0/t, 0), opens toward −mean.
    StressForm { a: f64, t: f64, c0: f64 },
}

impl SecondOrderCone {
    /// Exact inequality test (tolerance 0).
    pub fn contains(&self, p: &HydroDevPair) -> bool {
        self.contains_mr(p.mean, p.dev_norm())
    }

    fn contains_mr(&self, mean: f64, r: f64) -> bool {
        match *self {
            SecondOrderCone::StrainForm { beta } => beta * r <= mean,
            SecondOrderCone::StressForm { a, t, c0 } => a * r + t * mean <= c0,
        }
    }

    /// Indicator function Ψ: 0 on the cone, +∞ outside.
    pub fn indicator(&self, p: &HydroDevPair) -> ExtendedReal {
        if self.contains(p) {
            ExtendedReal::ZERO
        } else {
            ExtendedReal::INFINITY
        }
    }

    /// Unique minimizer of w_m(m−p_m)² + w_d‖d−p_d‖² over the cone.
    pub fn project(&self, p: &HydroDevPair, weights: &MetricWeights) -> HydroDevPair {
        let r = p.dev_norm();
        if self.contains_mr(p.mean, r) {
            return *p;
        }
        let (m, rho, _) = wedge_project(self, p.mean, r, weights.mean, weights.dev);
        let dev = if rho > 0.0 && r > 0.0 {
            p.dev().scale(rho / r)
        } else {
            SymTensor::ZERO
        };
        snap_into(self, HydroDevPair::new(m, dev))
    }
}

/// Positive block-diagonal weights of the metric w_m·m² + w_d·‖dev‖².
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MetricWeights {
    pub mean: f64,
    pub dev: f64,
}

impl MetricWeights {
    pub const UNIT: MetricWeights = MetricWeights { mean: 1.0, dev: 1.0 };

    pub fn new(mean: f64, dev: f64) -> Self {
        MetricWeights { mean, dev }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.mean > 0.0 && self.dev > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "metric weights must be positive, got ({}, {})",
                self.mean, self.dev
            )));
        }
        Ok(())
    }

    /// ‖p‖ in this metric.
    pub fn norm(&self, p: &HydroDevPair) -> f64 {
        (self.mean * p.mean * p.mean + self.dev * duality(p.dev(), p.dev())).sqrt()
    }
}

/// Analytic region the reduced 2-variable solution landed in. Consumers use
/// it to pick the matching consistent tangent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProxRegion {
    /// No cone constraint was active beyond ρ ≥ 0.
    Free,
    /// Reduced centers already feasible (only the radial shift acted).
    Interior,
    /// ρ* = 0 with the mean free (edge {ρ = 0} of the wedge).
    DevZero,
    /// On the slanted cone edge with ρ* > 0.
    Slant,
    /// Clamped to the wedge apex.
    Apex,
}

/// Weighted projection of (m̄, ρ̄) onto the planar wedge the cone carves out
/// of the (mean, ‖dev‖ ≥ 0) half-plane. ρ̄ may be negative (radial shifts).
fn wedge_project(
    cone: &SecondOrderCone,
    mb: f64,
    rb: f64,
    am: f64,
    ad: f64,
) -> (f64, f64, ProxRegion) {
    let feasible = rb >= 0.0 && cone.contains_mr(mb, rb);
    if feasible {
        return (mb, rb, ProxRegion::Interior);
    }
    let dist2 = |m: f64, r: f64| am * (m - mb) * (m - mb) + ad * (r - rb) * (r - rb);
    match *cone {
        SecondOrderCone::StrainForm { beta } => {
            // edge A: {ρ = 0, m ≥ 0}
            let pa = (mb.max(0.0), 0.0);
            let pa_region = if mb > 0.0 { ProxRegion::DevZero } else { ProxRegion::Apex };
            // edge B: {m = βρ, ρ ≥ 0}
            let rho_line = (beta * am * mb + ad * rb) / (beta * beta * am + ad);
            let rho = rho_line.max(0.0);
            let pb = (beta * rho, rho);
            let pb_region = if rho > 0.0 { ProxRegion::Slant } else { ProxRegion::Apex };
            if dist2(pa.0, pa.1) <= dist2(pb.0, pb.1) {
                (pa.0, pa.1, pa_region)
            } else {
                (pb.0, pb.1, pb_region)
            }
        }
        SecondOrderCone::StressForm { a, t, c0 } => {
            let apex = c0 / t;
            // edge A: {ρ = 0, m ≤ c0/t}
            let pa = (mb.min(apex), 0.0);
            let pa_region = if mb < apex { ProxRegion::DevZero } else { ProxRegion::Apex };
            // edge B: {a·ρ + t·m = c0, ρ ≥ 0}
            let mu = (t * mb + a * rb - c0) / (t * t / am + a * a / ad);
            let (m_line, rho_line) = (mb - mu * t / am, rb - mu * a / ad);
            let (pb, pb_region) = if rho_line >= 0.0 {
                ((m_line, rho_line), ProxRegion::Slant)
            } else {
                ((apex, 0.0), ProxRegion::Apex)
            };
            if dist2(pa.0, pa.1) <= dist2(pb.0, pb.1) {
                (pa.0, pa.1, pa_region)
            } else {
                (pb.0, pb.1, pb_region)
            }
        }
    }
}

/// Forces exact cone membership after f64 reconstruction by shrinking the
/// deviator a few ulps (the inequality test is the arbiter downstream).
pub fn snap_into(cone: &SecondOrderCone, p: HydroDevPair) -> HydroDevPair {
    let mut q = p;
    for _ in 0..8 {
        if cone.contains(&q) {
            return q;
        }
        q = HydroDevPair::new(q.mean, q.dev().scale(1.0 - 4.0 * f64::EPSILON));
    }
    // deviator shrinking cannot fix a mean-side violation; collapse to the axis
    match *cone {
        SecondOrderCone::StrainForm { .. } => HydroDevPair::new(q.mean.max(0.0), SymTensor::ZERO),
        SecondOrderCone::StressForm { a: _, t, c0 } => {
            HydroDevPair::new(q.mean.min(c0 / t), SymTensor::ZERO)
        }
    }
}

/// Domain restriction of a [`HydroDevFn`].
#[derive(Clone, Debug)]
pub enum Domain {
    All,
    Cone(SecondOrderCone),
    /// Indicator of a single point (Ψ_{p}).
    Point(HydroDevPair),
}

/// The convex function family this artifact needs, closed under the
/// operations of the incremental problem:
///
/// f(p) = ½·q_m·(p_m − c_m)² + ½·q_d·‖p_d − c_d‖² + l_m·p_m + ⟨p_d, l_d⟩
///        + r·‖p_d‖ + k + Ψ_domain(p)
///
/// Convexity requires q_m, q_d ≥ 0 and r ≥ 0 (validated where it matters).
#[derive(Clone, Debug)]
pub struct HydroDevFn {
    pub quad_mean: f64,
    pub quad_dev: f64,
    pub center: HydroDevPair,
    pub lin_mean: f64,
    pub lin_dev: SymTensor,
    pub radial: f64,
    pub constant: f64,
    pub domain: Domain,
}

impl HydroDevFn {
    pub fn zero() -> Self {
        HydroDevFn {
            quad_mean: 0.0,
            quad_dev: 0.0,
            center: HydroDevPair::ZERO,
            lin_mean: 0.0,
            lin_dev: SymTensor::ZERO,
            radial: 0.0,
            constant: 0.0,
            domain: Domain::All,
        }
    }

    /// ½·q_m·m² + ½·q_d·‖dev‖² centered at the origin.
    pub fn quadratic(quad_mean: f64, quad_dev: f64) -> Self {
        HydroDevFn {
            quad_mean,
            quad_dev,
            ..HydroDevFn::zero()
        }
    }

    /// ½‖·‖² in the natural pair norm.
    pub fn half_squared_norm() -> Self {
        HydroDevFn::quadratic(1.0, 1.0)
    }

    pub fn indicator(cone: SecondOrderCone) -> Self {
        HydroDevFn {
            domain: Domain::Cone(cone),
            ..HydroDevFn::zero()
        }
    }

    pub fn point_indicator(p: HydroDevPair) -> Self {
        HydroDevFn {
            domain: Domain::Point(p),
            ..HydroDevFn::zero()
        }
    }

    /// l_m·mean + r·‖dev‖ (the Drücker-Prager linear/radial shape).
    pub fn linear_radial(lin_mean: f64, radial: f64) -> Self {
        HydroDevFn {
            lin_mean,
            radial,
            ..HydroDevFn::zero()
        }
    }

    pub fn with_cone(mut self, cone: SecondOrderCone) -> Self {
        self.domain = Domain::Cone(cone);
        self
    }

    pub fn with_center(mut self, center: HydroDevPair) -> Self {
        self.center = center;
        self
    }

    pub fn with_lin_dev(mut self, lin_dev: SymTensor) -> Self {
        self.lin_dev = lin_dev.deviator();
        self
    }

    pub fn with_constant(mut self, constant: f64) -> Self {
        self.constant = constant;
        self
    }

    fn smooth_at(&self, mean: f64, dev: &SymTensor) -> f64 {
        let dm = mean - self.center.mean;
        let dd = dev.sub(self.center.dev());
        0.5 * self.quad_mean * dm * dm
            + 0.5 * self.quad_dev * duality(&dd, &dd)
            + self.lin_mean * mean
            + duality(dev, &self.lin_dev)
            + self.radial * dev.norm()
            + self.constant
    }

    pub fn eval(&self, p: &HydroDevPair) -> ExtendedReal {
        match &self.domain {
            Domain::All => {}
            Domain::Cone(c) => {
                if !c.contains(p) {
                    return ExtendedReal::INFINITY;
                }
            }
            Domain::Point(q) => {
                if p.mean != q.mean || p.dev().components() != q.dev().components() {
                    return ExtendedReal::INFINITY;
                }
            }
        }
        ExtendedReal::finite(self.smooth_at(p.mean, p.dev()))
    }

    fn is_strong_quadratic(&self) -> bool {
        self.quad_mean > 0.0
            && self.quad_dev > 0.0
            && self.radial == 0.0
            && matches!(self.domain, Domain::All)
    }

    fn validate_convex(&self) -> Result<(), Error> {
        if self.quad_mean < 0.0 || self.quad_dev < 0.0 || self.radial < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "nonconvex HydroDevFn: quad=({}, {}), radial={}",
                self.quad_mean, self.quad_dev, self.radial
            )));
        }
        Ok(())
    }
}

/// Result of a proximal solve: the minimizer, the attained minimum of
/// ½⟨z−w, S(z−w)⟩ + f(w), and the reduced-problem geometry consumers need
/// for consistent tangents.
#[derive(Clone, Debug)]
pub struct ProxResult {
    pub argmin: HydroDevPair,
    pub value: f64,
    pub region: ProxRegion,
    /// Norm of the combined quadratic dev-center d̄.
    pub r_bar: f64,
    /// Reduced dev norm of the minimizer.
    pub rho_star: f64,
    /// Unit dev direction of d̄ (zero when r_bar = 0).
    pub dir: SymTensor,
}

/// argmin_w ½·S_m(z_m−w_m)² + ½·S_d‖z_d−w_d‖² + f(w), solved in closed form.
///
/// The deviatoric argument reduces to its norm along the direction of the
/// combined quadratic center; the reduced 2-variable problem is a weighted
/// wedge projection.
pub fn prox(f: &HydroDevFn, metric: &MetricWeights, z: &HydroDevPair) -> Result<ProxResult, Error> {
    metric.validate()?;
    f.validate_convex()?;

    let half_dist2 = |w: &HydroDevPair| {
        let dm = z.mean - w.mean;
        let dd = z.dev().sub(w.dev());
        0.5 * metric.mean * dm * dm + 0.5 * metric.dev * duality(&dd, &dd)
    };

    if let Domain::Point(q) = &f.domain {
        let value = half_dist2(q) + f.smooth_at(q.mean, q.dev());
        return Ok(ProxResult {
            argmin: *q,
            value,
            region: ProxRegion::Free,
            r_bar: 0.0,
            rho_star: q.dev_norm(),
            dir: SymTensor::ZERO,
        });
    }

    let am = metric.mean + f.quad_mean;
    let ad = metric.dev + f.quad_dev;
    let m_bar = (metric.mean * z.mean + f.quad_mean * f.center.mean - f.lin_mean) / am;
    let d_bar = z
        .dev()
        .scale(metric.dev)
        .add(&f.center.dev().scale(f.quad_dev))
        .sub(&f.lin_dev)
        .scale(1.0 / ad);
    let r_bar = d_bar.norm();
    let rho_bar = r_bar - f.radial / ad;

    let (m_star, rho_star, region) = match &f.domain {
        Domain::All => (m_bar, rho_bar.max(0.0), ProxRegion::Free),
        Domain::Cone(c) => wedge_project(c, m_bar, rho_bar, am, ad),
        Domain::Point(_) => unreachable!(),
    };

    let dir = if r_bar > 0.0 {
        d_bar.scale(1.0 / r_bar)
    } else {
        SymTensor::ZERO
    };
    let dev_star = if rho_star > 0.0 && r_bar > 0.0 {
        d_bar.scale(rho_star / r_bar)
    } else {
        SymTensor::ZERO
    };
    let mut argmin = HydroDevPair::new(m_star, dev_star);
    if let Domain::Cone(c) = &f.domain {
        argmin = snap_into(c, argmin);
    }
    // evaluate smooth parts directly; the domain indicator is satisfied by construction
    let value = half_dist2(&argmin) + f.smooth_at(argmin.mean, argmin.dev());
    Ok(ProxResult {
        argmin,
        value,
        region,
        r_bar,
        rho_star,
        dir,
    })
}

/// Result of an inf-convolution: the value and a split x = u + v attaining it.
#[derive(Clone, Debug)]
pub struct InfConvolution {
    pub value: ExtendedReal,
    pub split: (HydroDevPair, HydroDevPair),
}

/// (f □ g)(x) = inf { f(u) + g(v) : u + v = x }.
///
/// Supported operand shapes: one side a point indicator, or one side a
/// strongly convex diagonal quadratic (then the problem is a prox of the
/// other side). Everything the incremental problem produces fits; other
/// pairs (two positively homogeneous operands, whose inf-convolution may be
/// unbounded below) are rejected.
pub fn inf_convolution(
    f: &HydroDevFn,
    g: &HydroDevFn,
    x: &HydroDevPair,
) -> Result<InfConvolution, Error> {
    if let Domain::Point(p) = &g.domain {
        let u = x.sub(p);
        let value = f.eval(&u) + g.smooth_at(p.mean, p.dev());
        return Ok(InfConvolution { value, split: (u, *p) });
    }
    if let Domain::Point(p) = &f.domain {
        let v = x.sub(p);
        let value = g.eval(&v) + f.smooth_at(p.mean, p.dev());
        return Ok(InfConvolution { value, split: (*p, v) });
    }
    if f.is_strong_quadratic() {
        // inf over v of f(x−v) + g(v): quadratic prox of g centered by f
        let center = HydroDevPair::new(
            x.mean - f.center.mean + f.lin_mean / f.quad_mean,
            x.dev()
                .sub(f.center.dev())
                .add(&f.lin_dev.scale(1.0 / f.quad_dev)),
        );
        let metric = MetricWeights::new(f.quad_mean, f.quad_dev);
        let r = prox(g, &metric, &center)?;
        let v = r.argmin;
        let u = x.sub(&v);
        let value = f.eval(&u) + g.smooth_at(v.mean, v.dev());
        return Ok(InfConvolution { value, split: (u, v) });
    }
    if g.is_strong_quadratic() {
        let center = HydroDevPair::new(
            x.mean - g.center.mean + g.lin_mean / g.quad_mean,
            x.dev()
                .sub(g.center.dev())
                .add(&g.lin_dev.scale(1.0 / g.quad_dev)),
        );
        let metric = MetricWeights::new(g.quad_mean, g.quad_dev);
        let r = prox(f, &metric, &center)?;
        let u = r.argmin;
        let v = x.sub(&u);
        let value = g.eval(&v) + f.smooth_at(u.mean, u.dev());
        return Ok(InfConvolution { value, split: (u, v) });
    }
    Err(Error::InfConvolutionOutsideFamily)
}

/// Relative tolerance of the sampled subgradient inequality.
pub const SUBGRADIENT_TOL: f64 = 1e-9;

/// Sampled test of y ∈ ∂f(x): checks ⟨z−x, y⟩ ≤ f(z) − f(x) over the probes.
///
/// A necessary test in general; exact for polyhedral/quadratic f when the
/// probes include the relevant support points. `pairing` supplies the duality
/// product of the (X, Y) pair in use.
pub fn subgradient_member<X, Y>(
    f: impl Fn(&X) -> ExtendedReal,
    x: &X,
    y: &Y,
    probes: &[X],
    pairing: impl Fn(&X, &Y) -> f64,
) -> Result<bool, Error> {
    let fx = f(x);
    let Some(fx) = fx.finite_value() else {
        return Err(Error::InfiniteValue {
            context: "subgradient_member base point f(x)",
        });
    };
    let tol = SUBGRADIENT_TOL * (1.0 + fx.abs());
    let px = pairing(x, y);
    for z in probes {
        let fz = f(z);
        let Some(fz) = fz.finite_value() else {
            continue; // +∞ on the right-hand side: inequality trivially holds
        };
        if pairing(z, y) - px > fz - fx + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{duality_prime, t1_strain};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_dev(rng: &mut ChaCha8Rng) -> SymTensor {
        let mut c = [0.0; 6];
        for v in &mut c {
            *v = rng.gen_range(-1.0..1.0);
        }
        SymTensor::from_components(c).deviator()
    }

    fn random_pair(rng: &mut ChaCha8Rng, scale: f64) -> HydroDevPair {
        HydroDevPair::new(rng.gen_range(-scale..scale), random_dev(rng).scale(scale))
    }

    #[test]
    fn extended_real_saturates() {
        let a = ExtendedReal::finite(1.0);
        assert_eq!((a + ExtendedReal::INFINITY).value(), f64::INFINITY);
        assert!((a + 2.0).is_finite());
    }

    #[test]
    fn indicator_strain_form() {
        let cone = SecondOrderCone::StrainForm { beta: 1.0 };
        assert!(cone
            .indicator(&HydroDevPair::new(1.0, SymTensor::ZERO))
            .is_finite());
        assert!(!cone
            .indicator(&HydroDevPair::new(-1.0, SymTensor::ZERO))
            .is_finite());
    }

    #[test]
    fn indicator_stress_form() {
        let cone = SecondOrderCone::StressForm { a: 1.0, t: 1.0, c0: 1.0 };
        let dev = SymTensor::diag(1.0, -1.0, 0.0);
        let dev = dev.scale(0.4 / dev.norm());
        assert!(cone.indicator(&HydroDevPair::new(0.5, dev)).is_finite());
        assert!(!cone.indicator(&HydroDevPair::new(0.7, dev)).is_finite());
    }

    #[test]
    fn project_identity_inside() {
        let cone = SecondOrderCone::StrainForm { beta: 1.0 };
        let p = HydroDevPair::new(2.0, SymTensor::diag(1.0, -0.5, -0.5).scale(0.3));
        let q = cone.project(&p, &MetricWeights::UNIT);
        assert_eq!(q.mean, p.mean);
    }

    #[test]
    fn project_apex_shadow() {
        let cone = SecondOrderCone::StrainForm { beta: 1.0 };
        let q = cone.project(&HydroDevPair::new(-2.0, SymTensor::ZERO), &MetricWeights::UNIT);
        assert_eq!(q.mean, 0.0);
        assert_eq!(q.dev_norm(), 0.0);
    }

    #[test]
    fn project_boundary_case() {
        // β = 1, p = (0, d) with ‖d‖ = 1 → (1/2, d/2)
        let cone = SecondOrderCone::StrainForm { beta: 1.0 };
        let d = SymTensor::diag(2.0, -1.0, -1.0);
        let d = d.scale(1.0 / d.norm());
        let q = cone.project(&HydroDevPair::new(0.0, d), &MetricWeights::UNIT);
        assert!((q.mean - 0.5).abs() < 1e-14);
        assert!((q.dev_norm() - 0.5).abs() < 1e-14);
        // oracle: projected-gradient descent
        let pg = projected_gradient_oracle(&cone, &HydroDevPair::new(0.0, d), &MetricWeights::UNIT);
        assert!((pg.mean - q.mean).abs() < 1e-9);
        assert!((pg.dev_norm() - q.dev_norm()).abs() < 1e-9);
    }

    /// Brute-force oracle: projected gradient descent on ½‖q−p‖²_w over the cone,
    /// using only feasibility tests and bisection toward the boundary.
    fn projected_gradient_oracle(
        cone: &SecondOrderCone,
        p: &HydroDevPair,
        w: &MetricWeights,
    ) -> HydroDevPair {
        // start from a strictly feasible point
        let mut q = match *cone {
            SecondOrderCone::StrainForm { .. } => HydroDevPair::new(1.0, SymTensor::ZERO),
            SecondOrderCone::StressForm { t, c0, .. } => {
                HydroDevPair::new(c0 / t - 1.0, SymTensor::ZERO)
            }
        };
        let mut step = 0.5;
        for _ in 0..20_000 {
            // gradient of the weighted distance
            let g = HydroDevPair::new(w.mean * (q.mean - p.mean), q.dev().sub(p.dev()).scale(w.dev));
            let mut cand = q.sub(&g.scale(step));
            if !cone.contains(&cand) {
                // bisect back toward q until feasible
                let mut lo = 0.0;
                let mut hi = 1.0;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let trial = q.add(&cand.sub(&q).scale(mid));
                    if cone.contains(&trial) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                cand = q.add(&cand.sub(&q).scale(lo));
            }
            let f_old = w.norm(&q.sub(p)).powi(2);
            let f_new = w.norm(&cand.sub(p)).powi(2);
            if f_new < f_old {
                q = cand;
            } else {
                step *= 0.5;
                if step < 1e-16 {
                    break;
                }
            }
        }
        q
    }

    #[test]
    fn prox_of_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_pair(&mut rng, 2.0);
        let r = prox(&HydroDevFn::zero(), &MetricWeights::new(3.0, 2.0), &z).unwrap();
        assert!((r.argmin.mean - z.mean).abs() < 1e-14);
        assert!(r.value.abs() < 1e-14);
    }

    #[test]
    fn prox_of_indicator_is_projection() {
        let cone = SecondOrderCone::StrainForm { beta: 0.7 };
        let w = MetricWeights::new(2.0, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let z = random_pair(&mut rng, 3.0);
            let r = prox(&HydroDevFn::indicator(cone), &w, &z).unwrap();
            let pj = cone.project(&z, &w);
            assert!((r.argmin.mean - pj.mean).abs() < 1e-12);
            assert!((r.argmin.dev_norm() - pj.dev_norm()).abs() < 1e-12);
            let half_d2 = 0.5 * w.norm(&z.sub(&pj)).powi(2);
            assert!((r.value - half_d2).abs() < 1e-12 * (1.0 + half_d2));
        }
    }

    /// Golden-section search for the minimum of a unimodal scalar function.
    fn golden(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let phi = (5.0f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - phi * (hi - lo);
        let mut d = lo + phi * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
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
            if (hi - lo).abs() < 1e-12 {
                break;
            }
        }
        fc.min(fd)
    }

    /// Brute-force oracle over (mean, ‖dev‖): nested golden-section search,
    /// the inner sweep over the feasible ρ-range at each mean (partial minima
    /// of a jointly convex function are convex in the outer variable).
    fn prox_value_oracle(f: &HydroDevFn, w: &MetricWeights, z: &HydroDevPair) -> f64 {
        // optimal dev direction: toward the combined quadratic center
        let ad = w.dev + f.quad_dev;
        let d_bar = z
            .dev()
            .scale(w.dev)
            .add(&f.center.dev().scale(f.quad_dev))
            .sub(&f.lin_dev)
            .scale(1.0 / ad);
        let dir = if d_bar.norm() > 0.0 {
            d_bar.scale(1.0 / d_bar.norm())
        } else {
            SymTensor::ZERO
        };
        let smooth = |m: f64, rho: f64| -> f64 {
            let p = HydroDevPair::new(m, dir.scale(rho));
            let dm = z.mean - m;
            let dd = z.dev().sub(p.dev());
            let q = 0.5 * w.mean * dm * dm + 0.5 * w.dev * duality(&dd, &dd);
            q + f.smooth_at(p.mean, p.dev())
        };
        let span = 4.0 * (1.0 + z.norm());
        // feasible ρ-interval at a given mean, from the wedge geometry
        let rho_range = |m: f64| -> Option<(f64, f64)> {
            match &f.domain {
                Domain::All => Some((0.0, span)),
                Domain::Cone(SecondOrderCone::StrainForm { beta }) => {
                    if m < 0.0 {
                        None
                    } else if *beta > 0.0 {
                        Some((0.0, (m / beta).min(span)))
                    } else {
                        Some((0.0, span))
                    }
                }
                Domain::Cone(SecondOrderCone::StressForm { a, t, c0 }) => {
                    let top = (c0 - t * m) / a;
                    if top < 0.0 {
                        None
                    } else {
                        Some((0.0, top.min(span)))
                    }
                }
                Domain::Point(_) => None,
            }
        };
        if let Domain::Point(p) = &f.domain {
            return smooth(p.mean, p.dev_norm());
        }
        let outer = |m: f64| -> f64 {
            match rho_range(m) {
                Some((lo, hi)) => golden(lo, hi, |rho| smooth(m, rho)),
                None => f64::INFINITY,
            }
        };
        golden(-span, span, outer)
    }

    #[test]
    fn prox_linear_plus_cone_matches_grid_oracle() {
        // Drücker-Prager shape: linear + cone indicator
        let cone = SecondOrderCone::StrainForm { beta: 0.35 };
        let f = HydroDevFn::linear_radial(0.8, 0.6).with_cone(cone);
        let w = MetricWeights::new(4.0, 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..12 {
            let z = random_pair(&mut rng, 1.5);
            let r = prox(&f, &w, &z).unwrap();
            let oracle = prox_value_oracle(&f, &w, &z);
            assert!(
                (r.value - oracle).abs() < 1e-7 * (1.0 + oracle.abs()),
                "prox {} vs oracle {}",
                r.value,
                oracle
            );
        }
    }

    #[test]
    fn inf_convolution_two_squares() {
        let f = HydroDevFn::half_squared_norm();
        let g = HydroDevFn::half_squared_norm();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_pair(&mut rng, 2.0);
        let r = inf_convolution(&f, &g, &x).unwrap();
        let expected = 0.25 * x.norm().powi(2);
        assert!((r.value.value() - expected).abs() < 1e-12 * (1.0 + expected));
        assert!((r.split.0.mean - x.mean / 2.0).abs() < 1e-12);
        assert!((r.split.1.mean - x.mean / 2.0).abs() < 1e-12);
    }

    #[test]
    fn inf_convolution_point_indicator() {
        let f = HydroDevFn::half_squared_norm();
        let g = HydroDevFn::point_indicator(HydroDevPair::ZERO);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_pair(&mut rng, 2.0);
        let r = inf_convolution(&f, &g, &x).unwrap();
        assert!((r.value.value() - f.eval(&x).value()).abs() < 1e-14);
        assert_eq!(r.split.1.mean, 0.0);
    }

    #[test]
    fn inf_convolution_quadratic_with_cone_matches_grid() {
        let cone = SecondOrderCone::StrainForm { beta: 0.5 };
        let f = HydroDevFn::quadratic(3.0, 2.0);
        let g = HydroDevFn::indicator(cone);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..8 {
            let x = random_pair(&mut rng, 1.5);
            let r = inf_convolution(&f, &g, &x).unwrap();
            // oracle: prox reformulation cross-checked against 2-D grid search
            let oracle = {
                let center = HydroDevPair::new(x.mean, *x.dev());
                let v = prox_value_oracle(&g, &MetricWeights::new(3.0, 2.0), &center);
                v
            };
            assert!(
                (r.value.value() - oracle).abs() < 1e-7 * (1.0 + oracle.abs()),
                "{} vs {}",
                r.value,
                oracle
            );
        }
    }

    #[test]
    fn inf_convolution_rejects_two_homogeneous_operands() {
        let f = HydroDevFn::linear_radial(1.0, 0.0);
        let g = HydroDevFn::linear_radial(-2.0, 0.0);
        let err = inf_convolution(&f, &g, &HydroDevPair::ZERO).unwrap_err();
        assert!(matches!(err, Error::InfConvolutionOutsideFamily));
    }

    #[test]
    fn subgradient_of_half_square() {
        let f = |p: &HydroDevPair| ExtendedReal::finite(0.5 * p.norm().powi(2));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_pair(&mut rng, 2.0);
        let probes: Vec<_> = (0..200).map(|_| random_pair(&mut rng, 4.0)).collect();
        // y = x (gradient): member
        assert!(subgradient_member(f, &x, &x, &probes, duality_prime).unwrap());
        // y = x + δ with a probe at x + δ: not a member
        let delta = HydroDevPair::new(0.5, SymTensor::ZERO);
        let y = x.add(&delta);
        let mut probes2 = probes.clone();
        probes2.push(x.add(&delta));
        assert!(!subgradient_member(f, &x, &y, &probes2, duality_prime).unwrap());
    }

    #[test]
    fn subgradient_of_cone_indicator_normal_direction() {
        // x on the boundary of the strain cone, y = outward normal in ⟨·,·⟩′
        let beta = 0.8;
        let cone = SecondOrderCone::StrainForm { beta };
        let f = move |p: &HydroDevPair| cone.indicator(p);
        let d = SymTensor::diag(2.0, -1.0, -1.0);
        let dhat = d.scale(1.0 / d.norm());
        let x = HydroDevPair::new(beta, dhat); // ‖dev‖ = 1, mean = β: boundary
        // outward normal of {βρ − m ≤ 0}: (−1, β·d̂)
        let y = HydroDevPair::new(-1.0, dhat.scale(beta));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let probes: Vec<_> = (0..500)
            .map(|_| {
                let dev = random_dev(&mut rng);
                let m = rng.gen_range(0.0..3.0);
                // dense sample of the cone: ‖dev‖ scaled within the bound
                let r_max = m / beta;
                let n = dev.norm();
                let dev = if n > 0.0 {
                    dev.scale(rng.gen_range(0.0..1.0) * r_max / n)
                } else {
                    dev
                };
                HydroDevPair::new(m, dev)
            })
            .collect();
        assert!(subgradient_member(f, &x, &y, &probes, duality_prime).unwrap());
    }

    #[test]
    fn subgradient_infinite_base_is_error() {
        let cone = SecondOrderCone::StrainForm { beta: 1.0 };
        let f = move |p: &HydroDevPair| cone.indicator(p);
        let x = HydroDevPair::new(-1.0, SymTensor::ZERO);
        let err = subgradient_member(f, &x, &x, &[], duality_prime).unwrap_err();
        assert!(matches!(err, Error::InfiniteValue { .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projection_idempotent(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cone = SecondOrderCone::StrainForm { beta: rng.gen_range(0.0..2.0) };
            let w = MetricWeights::new(rng.gen_range(0.1..5.0), rng.gen_range(0.1..5.0));
            let p = random_pair(&mut rng, 3.0);
            let q = cone.project(&p, &w);
            let q2 = cone.project(&q, &w);
            prop_assert!(q.sub(&q2).norm() <= 1e-12 * (1.0 + q.norm()));
        }

        #[test]
        fn projection_variational_inequality(seed in 0u64..200) {
            // ⟨p − Pp, q − Pp⟩_w ≤ tol for q in the cone
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let beta = rng.gen_range(0.0..2.0);
            let cone = SecondOrderCone::StrainForm { beta };
            let w = MetricWeights::new(rng.gen_range(0.1..5.0), rng.gen_range(0.1..5.0));
            let p = random_pair(&mut rng, 3.0);
            let pp = cone.project(&p, &w);
            for _ in 0..20 {
                let dev = random_dev(&mut rng);
                let m = rng.gen_range(0.0..3.0);
                let n = dev.norm();
                let dev = if n > 0.0 && beta > 0.0 {
                    dev.scale(rng.gen_range(0.0..1.0) * (m / beta) / n)
                } else { dev.scale(0.0) };
                let q = HydroDevPair::new(m, dev);
                let lhs = w.mean * (p.mean - pp.mean) * (q.mean - pp.mean)
                    + w.dev * duality(&p.dev().sub(pp.dev()), &q.dev().sub(pp.dev()));
                prop_assert!(lhs <= 1e-10 * (1.0 + p.norm()) * (1.0 + q.norm()));
            }
        }

        #[test]
        fn prox_firmly_nonexpansive(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cone = SecondOrderCone::StrainForm { beta: rng.gen_range(0.0..1.5) };
            let f = HydroDevFn::linear_radial(rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0))
                .with_cone(cone);
            let w = MetricWeights::new(rng.gen_range(0.5..5.0), rng.gen_range(0.5..5.0));
            let z1 = random_pair(&mut rng, 2.0);
            let z2 = random_pair(&mut rng, 2.0);
            let p1 = prox(&f, &w, &z1).unwrap().argmin;
            let p2 = prox(&f, &w, &z2).unwrap().argmin;
            prop_assert!(w.norm(&p1.sub(&p2)) <= w.norm(&z1.sub(&z2)) + 1e-9);
        }

        #[test]
        fn inf_convolution_upper_bound(seed in 0u64..100) {
            // value ≤ f(u) + g(x−u) for sampled u
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = HydroDevFn::quadratic(rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0));
            let cone = SecondOrderCone::StrainForm { beta: rng.gen_range(0.0..1.0) };
            let g = HydroDevFn::linear_radial(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))
                .with_cone(cone);
            let x = random_pair(&mut rng, 2.0);
            let r = inf_convolution(&f, &g, &x).unwrap();
            for _ in 0..30 {
                let u = random_pair(&mut rng, 2.0);
                let bound = f.eval(&u) + g.eval(&x.sub(&u)).value();
                prop_assert!(r.value.value() <= bound.value() + 1e-9 * (1.0 + bound.value().abs().min(1e300)));
            }
        }
    }
}
