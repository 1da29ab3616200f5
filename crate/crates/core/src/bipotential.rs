//! Bipotentials and syncs as first-class values: construction, conversion,
//! transformation, graph membership and a statistical axiom auditor.
//!
//! Axioms are audited, not enforced at construction: lower semicontinuity and
//! convexity are undecidable from point evaluations, and the incremental
//! problem deliberately produces a function that fails convexity in its
//! second argument — the auditor has to be able to report that, not reject it.

use crate::convex::{subgradient_member, ExtendedReal};
use crate::Error;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Relative Fenchel-margin threshold used by the auditor.
pub const FENCHEL_TOL: f64 = 1e-12;
/// Absolute segment-convexity slack used by the auditor.
pub const CONVEXITY_TOL: f64 = 1e-10;
/// Graph-gap tolerance for equivalence-(c) spot checks.
pub const EQUIVALENCE_TOL: f64 = 1e-9;
/// Interior points per audited segment.
pub const SEGMENT_POINTS: usize = 11;

/// Minimal vector-point interface the audits need: affine combinations,
/// scaling and a flat component view for witness serialization.
pub trait Point: Clone {
    /// (1−t)·self + t·other.
    fn lerp(&self, other: &Self, t: f64) -> Self;
    fn scale(&self, a: f64) -> Self;
    fn components(&self) -> Vec<f64>;
    fn norm(&self) -> f64 {
        self.components().iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl Point for f64 {
    fn lerp(&self, other: &Self, t: f64) -> Self {
        (1.0 - t) * self + t * other
    }
    fn scale(&self, a: f64) -> Self {
        a * self
    }
    fn components(&self) -> Vec<f64> {
        vec![*self]
    }
}

impl Point for crate::tensor::SymTensor {
    fn lerp(&self, other: &Self, t: f64) -> Self {
        self.scale(1.0 - t).add(&other.scale(t))
    }
    fn scale(&self, a: f64) -> Self {
        crate::tensor::SymTensor::scale(self, a)
    }
    fn components(&self) -> Vec<f64> {
        self.components().to_vec()
    }
}

impl Point for crate::tensor::HydroDevPair {
    fn lerp(&self, other: &Self, t: f64) -> Self {
        self.scale(1.0 - t).add(&other.scale(t))
    }
    fn scale(&self, a: f64) -> Self {
        crate::tensor::HydroDevPair::scale(self, a)
    }
    fn components(&self) -> Vec<f64> {
        let mut c = vec![self.mean];
        c.extend_from_slice(&self.dev().components());
        c
    }
}

type Eval2<X, Y> = Arc<dyn Fn(&X, &Y) -> ExtendedReal + Send + Sync>;
type Pairing<X, Y> = Arc<dyn Fn(&X, &Y) -> f64 + Send + Sync>;
type Predicate<T> = Arc<dyn Fn(&T) -> bool + Send + Sync>;

/// Two-argument extended-real function with a duality product and domain
/// descriptors. The bipotential axioms are audited by [`axiom_audit`].
#[derive(Clone)]
pub struct Bipotential<X, Y> {
    pub name: String,
    eval: Eval2<X, Y>,
    pairing: Pairing<X, Y>,
    domain_x: Predicate<X>,
    domain_y: Predicate<Y>,
}

impl<X, Y> Bipotential<X, Y> {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&X, &Y) -> ExtendedReal + Send + Sync + 'static,
        pairing: impl Fn(&X, &Y) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Bipotential {
            name: name.into(),
            eval: Arc::new(eval),
            pairing: Arc::new(pairing),
            domain_x: Arc::new(|_| true),
            domain_y: Arc::new(|_| true),
        }
    }

    pub fn with_domains(
        mut self,
        domain_x: impl Fn(&X) -> bool + Send + Sync + 'static,
        domain_y: impl Fn(&Y) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.domain_x = Arc::new(domain_x);
        self.domain_y = Arc::new(domain_y);
        self
    }

    pub fn eval(&self, x: &X, y: &Y) -> ExtendedReal {
        (self.eval)(x, y)
    }

    pub fn pairing(&self, x: &X, y: &Y) -> f64 {
        (self.pairing)(x, y)
    }

    pub fn in_domain_x(&self, x: &X) -> bool {
        (self.domain_x)(x)
    }

    pub fn in_domain_y(&self, y: &Y) -> bool {
        (self.domain_y)(y)
    }

    /// b(x,y) − ⟨x,y⟩; +∞ where b is; ≥ 0 up to rounding for a valid bipotential.
    pub fn graph_gap(&self, x: &X, y: &Y) -> ExtendedReal {
        let b = self.eval(x, y);
        if let Some(v) = b.finite_value() {
            ExtendedReal::finite(v - self.pairing(x, y))
        } else {
            ExtendedReal::INFINITY
        }
    }
}

/// Tests (x, y) ∈ M(b): b finite and b(x,y) − ⟨x,y⟩ ≤ tol.
pub fn graph_membership<X, Y>(b: &Bipotential<X, Y>, x: &X, y: &Y, tol: f64) -> bool {
    match b.graph_gap(x, y).finite_value() {
        Some(gap) => gap <= tol,
        None => false,
    }
}

/// Nonnegative two-argument function whose zero-set is a constitutive graph.
#[derive(Clone)]
pub struct SyncFn<X, Y> {
    pub name: String,
    eval: Eval2<X, Y>,
}

impl<X, Y> SyncFn<X, Y> {
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(&X, &Y) -> ExtendedReal + Send + Sync + 'static,
    ) -> Self {
        SyncFn {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, x: &X, y: &Y) -> ExtendedReal {
        (self.eval)(x, y)
    }

    /// Zero-set membership at tolerance `tol`.
    pub fn vanishes(&self, x: &X, y: &Y, tol: f64) -> bool {
        match self.eval(x, y).finite_value() {
            Some(v) => v.abs() <= tol,
            None => false,
        }
    }
}

/// c(x,y) = b(x,y) − ⟨x,y⟩.
pub fn sync_from_bipotential<X: 'static, Y: 'static>(b: &Bipotential<X, Y>) -> SyncFn<X, Y> {
    let eval = b.eval.clone();
    let pairing = b.pairing.clone();
    SyncFn::new(format!("sync({})", b.name), move |x: &X, y: &Y| {
        let v = eval(x, y);
        match v.finite_value() {
            Some(v) => ExtendedReal::finite(v - pairing(x, y)),
            None => ExtendedReal::INFINITY,
        }
    })
}

/// b(x,y) = c(x,y) + ⟨x,y⟩. The graph of b is the zero-set of c, whatever
/// duality product is supplied.
pub fn bipotential_from_sync<X: 'static, Y: 'static>(
    c: &SyncFn<X, Y>,
    pairing: impl Fn(&X, &Y) -> f64 + Send + Sync + 'static,
) -> Bipotential<X, Y> {
    let eval = c.eval.clone();
    Bipotential::new(
        format!("bipotential({})", c.name),
        move |x: &X, y: &Y| {
            let v = eval(x, y);
            match v.finite_value() {
                Some(v) => ExtendedReal::finite(v), // add pairing below
                None => ExtendedReal::INFINITY,
            }
        },
        pairing,
    )
    .into_sum_with_pairing()
}

impl<X: 'static, Y: 'static> Bipotential<X, Y> {
    fn into_sum_with_pairing(self) -> Self {
        let eval = self.eval.clone();
        let pairing = self.pairing.clone();
        Bipotential {
            name: self.name,
            eval: Arc::new(move |x: &X, y: &Y| {
                let v = eval(x, y);
                match v.finite_value() {
                    Some(v) => ExtendedReal::finite(v + pairing(x, y)),
                    None => ExtendedReal::INFINITY,
                }
            }),
            pairing: self.pairing,
            domain_x: self.domain_x,
            domain_y: self.domain_y,
        }
    }
}

/// Linear bijection supplied as a forward/inverse closure pair, validated by
/// sampling (linearity plus roundtrip identity) since symbolic checks are
/// impossible on closures.
#[derive(Clone)]
pub struct LinearBijection<A, B> {
    forward: Arc<dyn Fn(&A) -> B + Send + Sync>,
    inverse: Arc<dyn Fn(&B) -> A + Send + Sync>,
}

impl<A, B> LinearBijection<A, B> {
    pub fn apply(&self, a: &A) -> B {
        (self.forward)(a)
    }

    pub fn invert(&self, b: &B) -> A {
        (self.inverse)(b)
    }
}

impl<A: Point, B: Point> LinearBijection<A, B> {
    /// Builds the bijection after verifying, on the supplied probes, that
    /// forward is linear, and inverse∘forward is the identity. Degenerate
    /// (non-injective) maps fail the roundtrip test.
    pub fn verified(
        forward: impl Fn(&A) -> B + Send + Sync + 'static,
        inverse: impl Fn(&B) -> A + Send + Sync + 'static,
        probes: &[A],
    ) -> Result<Self, Error> {
        let tol = 1e-10;
        for p in probes {
            let scale_err = {
                let lhs = forward(&p.scale(2.5));
                let rhs = forward(p).scale(2.5);
                diff_norm(&lhs, &rhs)
            };
            if scale_err > tol * (1.0 + p.norm()) {
                return Err(Error::SingularMap(
                    "forward map fails homogeneity on probes".into(),
                ));
            }
            let round_err = diff_norm(&inverse(&forward(p)), p);
            if round_err > tol * (1.0 + p.norm()) {
                return Err(Error::SingularMap(
                    "inverse∘forward is not the identity on probes".into(),
                ));
            }
        }
        for pair in probes.windows(2) {
            let (p, q) = (&pair[0], &pair[1]);
            for t in [-1.0, 0.3, 2.0] {
                let lhs = forward(&p.lerp(q, t));
                let rhs = forward(p).lerp(&forward(q), t);
                if diff_norm(&lhs, &rhs) > tol * (1.0 + p.norm() + q.norm()) {
                    return Err(Error::SingularMap(
                        "forward map fails additivity on probes".into(),
                    ));
                }
            }
        }
        Ok(LinearBijection {
            forward: Arc::new(forward),
            inverse: Arc::new(inverse),
        })
    }
}

fn diff_norm<P: Point>(a: &P, b: &P) -> f64 {
    a.components()
        .iter()
        .zip(b.components())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// c(x,y) = α·c′(Tx, Ly). Preserves the zero-set exactly: c(x,y)=0 ⟺ c′(Tx,Ly)=0.
pub fn transform_sync<X, Y, XP, YP>(
    c_prime: &SyncFn<XP, YP>,
    t: LinearBijection<X, XP>,
    l: LinearBijection<Y, YP>,
    alpha: f64,
) -> Result<SyncFn<X, Y>, Error>
where
    X: 'static,
    Y: 'static,
    XP: Point + 'static,
    YP: Point + 'static,
{
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "transform_sync needs alpha > 0, got {alpha}"
        )));
    }
    let eval = c_prime.eval.clone();
    let name = format!("transform({})", c_prime.name);
    Ok(SyncFn::new(name, move |x: &X, y: &Y| {
        let v = eval(&t.apply(x), &l.apply(y));
        match v.finite_value() {
            Some(v) => ExtendedReal::finite(alpha * v),
            None => ExtendedReal::INFINITY,
        }
    }))
}

/// b(x,y) = φ(x) + φ*(y), the associated-law special case.
///
/// The caller supplies the conjugate in closed form; it is audited at desk
/// scale by grid conjugation over the supplied grids: the grid conjugate
/// sup_x ⟨x,y⟩ − φ(x) is a lower bound on φ*, so a supplied value below it is
/// definitely wrong, and one above it by more than `slack` (grid resolution
/// allowance) is flagged as well.
pub fn separable<X, Y>(
    phi: impl Fn(&X) -> ExtendedReal + Send + Sync + 'static,
    phi_star: impl Fn(&Y) -> ExtendedReal + Send + Sync + 'static,
    pairing: impl Fn(&X, &Y) -> f64 + Send + Sync + Clone + 'static,
    primal_grid: &[X],
    dual_grid: &[Y],
    slack: f64,
    name: impl Into<String>,
) -> Result<Bipotential<X, Y>, Error> {
    for y in dual_grid {
        let supplied = phi_star(y);
        let mut grid_conj = f64::NEG_INFINITY;
        for x in primal_grid {
            if let Some(px) = phi(x).finite_value() {
                grid_conj = grid_conj.max(pairing(x, y) - px);
            }
        }
        if !grid_conj.is_finite() {
            continue;
        }
        let tol = 1e-9 * (1.0 + grid_conj.abs());
        // a supplied +∞ (support-function value) cannot be refuted by a grid
        if let Some(s) = supplied.finite_value() {
            if s < grid_conj - tol {
                return Err(Error::ConjugateMismatch {
                    detail: format!("supplied conjugate {s} below grid conjugate {grid_conj}"),
                });
            }
            if s > grid_conj + slack {
                return Err(Error::ConjugateMismatch {
                    detail: format!(
                        "supplied conjugate {s} exceeds grid conjugate {grid_conj} by more than slack {slack}"
                    ),
                });
            }
        }
    }
    Ok(Bipotential::new(
        name,
        move |x: &X, y: &Y| phi(x) + phi_star(y).value(),
        pairing,
    ))
}

/// Set whose sections in each variable are closed and convex; the minimal
/// structure a constitutive graph needs to carry a bipotential.
#[derive(Clone)]
pub struct BBGraph<X, Y> {
    pub name: String,
    membership: Arc<dyn Fn(&X, &Y) -> bool + Send + Sync>,
}

impl<X, Y> BBGraph<X, Y> {
    pub fn new(
        name: impl Into<String>,
        membership: impl Fn(&X, &Y) -> bool + Send + Sync + 'static,
    ) -> Self {
        BBGraph {
            name: name.into(),
            membership: Arc::new(membership),
        }
    }

    pub fn contains(&self, x: &X, y: &Y) -> bool {
        (self.membership)(x, y)
    }
}

/// b∞(x,y) = ⟨x,y⟩ + Ψ_M(x,y): finite exactly on M, where it equals the pairing.
pub fn b_infinity<X: 'static, Y: 'static>(
    graph: BBGraph<X, Y>,
    pairing: impl Fn(&X, &Y) -> f64 + Send + Sync + Clone + 'static,
) -> Bipotential<X, Y> {
    let p = pairing.clone();
    Bipotential::new(
        format!("b_inf({})", graph.name),
        move |x: &X, y: &Y| {
            if graph.contains(x, y) {
                ExtendedReal::finite(p(x, y))
            } else {
                ExtendedReal::INFINITY
            }
        },
        pairing,
    )
}

/// Sample sources for [`axiom_audit`]: in/out-of-domain points, optional
/// exact graph points, and probe sets for the subgradient checks.
pub struct AuditSampler<X, Y> {
    pub sample_x: Arc<dyn Fn(&mut ChaCha8Rng) -> X + Send + Sync>,
    pub sample_y: Arc<dyn Fn(&mut ChaCha8Rng) -> Y + Send + Sync>,
    pub graph_points: Option<Arc<dyn Fn(&mut ChaCha8Rng) -> (X, Y) + Send + Sync>>,
    pub probes_x: Arc<dyn Fn(&mut ChaCha8Rng, usize) -> Vec<X> + Send + Sync>,
    pub probes_y: Arc<dyn Fn(&mut ChaCha8Rng, usize) -> Vec<Y> + Send + Sync>,
}

/// Sample volumes for one audit run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AuditCounts {
    pub pairs: usize,
    pub segments: usize,
    pub graph_checks: usize,
    pub probes_per_check: usize,
}

impl Default for AuditCounts {
    fn default() -> Self {
        AuditCounts {
            pairs: 10_000,
            segments: 500,
            graph_checks: 100,
            probes_per_check: 64,
        }
    }
}

/// Witness of one audit violation, serialized as flat component vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditWitness {
    pub kind: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub margin: f64,
}

/// Outcome of an [`axiom_audit`] run; serializes to JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub name: String,
    pub seed: u64,
    pub pairs_checked: usize,
    pub fenchel_violations: usize,
    /// min over checked pairs of (b − ⟨x,y⟩)/(1 + |b|); ≥ −1e-12 when valid.
    pub worst_fenchel_margin: f64,
    pub segments_checked: usize,
    pub convexity_violations_x: usize,
    pub convexity_violations_y: usize,
    /// max over segment checks of b(mid) − chord, normalized; ≤ 1e-10 when valid.
    pub worst_convexity_gap: f64,
    pub graph_points_checked: usize,
    pub equivalence_failures: usize,
    pub witnesses: Vec<AuditWitness>,
}

impl AuditReport {
    pub fn passes(&self) -> bool {
        self.fenchel_violations == 0
            && self.convexity_violations_x == 0
            && self.convexity_violations_y == 0
            && self.equivalence_failures == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("audit report serialization")
    }
}

const MAX_WITNESSES: usize = 16;

fn push_witness<X: Point, Y: Point>(
    witnesses: &mut Vec<AuditWitness>,
    kind: &str,
    x: &X,
    y: &Y,
    margin: f64,
) {
    if witnesses.len() < MAX_WITNESSES {
        witnesses.push(AuditWitness {
            kind: kind.into(),
            x: x.components(),
            y: y.components(),
            margin,
        });
    }
}

/// Statistical audit of the bipotential axioms:
/// (b) Fenchel-type inequality b ≥ ⟨·,·⟩ on sampled pairs;
/// (a) convexity of both partial maps along sampled segments;
/// (c) on sampled graph points, both subgradient inclusions hold.
///
/// Report-only: a failing function is described, never rejected.
pub fn axiom_audit<X: Point + 'static, Y: Point + 'static>(
    b: &Bipotential<X, Y>,
    sampler: &AuditSampler<X, Y>,
    counts: &AuditCounts,
    seed: u64,
) -> AuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AuditReport {
        name: b.name.clone(),
        seed,
        pairs_checked: 0,
        fenchel_violations: 0,
        worst_fenchel_margin: f64::INFINITY,
        segments_checked: 0,
        convexity_violations_x: 0,
        convexity_violations_y: 0,
        worst_convexity_gap: f64::NEG_INFINITY,
        graph_points_checked: 0,
        equivalence_failures: 0,
        witnesses: Vec::new(),
    };

    // (b) inequality
    for _ in 0..counts.pairs {
        let x = (sampler.sample_x)(&mut rng);
        let y = (sampler.sample_y)(&mut rng);
        let bv = b.eval(&x, &y);
        let Some(bv) = bv.finite_value() else { continue };
        report.pairs_checked += 1;
        let margin = (bv - b.pairing(&x, &y)) / (1.0 + bv.abs());
        if margin < report.worst_fenchel_margin {
            report.worst_fenchel_margin = margin;
        }
        if margin < -FENCHEL_TOL {
            report.fenchel_violations += 1;
            push_witness(&mut report.witnesses, "fenchel", &x, &y, margin);
        }
    }

    // (a) partial convexity along segments
    for k in 0..counts.segments {
        let in_y = k % 2 == 0;
        let x = (sampler.sample_x)(&mut rng);
        let y = (sampler.sample_y)(&mut rng);
        if in_y {
            let y2 = (sampler.sample_y)(&mut rng);
            let (b1, b2) = (b.eval(&x, &y), b.eval(&x, &y2));
            let (Some(b1), Some(b2)) = (b1.finite_value(), b2.finite_value()) else {
                continue;
            };
            report.segments_checked += 1;
            let scale = 1.0 + b1.abs() + b2.abs();
            for i in 1..=SEGMENT_POINTS {
                let t = i as f64 / (SEGMENT_POINTS + 1) as f64;
                let mid = y.lerp(&y2, t);
                let bm = b.eval(&x, &mid).value();
                let gap = (bm - ((1.0 - t) * b1 + t * b2)) / scale;
                if gap > report.worst_convexity_gap {
                    report.worst_convexity_gap = gap;
                }
                if gap > CONVEXITY_TOL {
                    report.convexity_violations_y += 1;
                    push_witness(&mut report.witnesses, "convexity_y", &x, &mid, gap);
                    break;
                }
            }
        } else {
            let x2 = (sampler.sample_x)(&mut rng);
            let (b1, b2) = (b.eval(&x, &y), b.eval(&x2, &y));
            let (Some(b1), Some(b2)) = (b1.finite_value(), b2.finite_value()) else {
                continue;
            };
            report.segments_checked += 1;
            let scale = 1.0 + b1.abs() + b2.abs();
            for i in 1..=SEGMENT_POINTS {
                let t = i as f64 / (SEGMENT_POINTS + 1) as f64;
                let mid = x.lerp(&x2, t);
                let bm = b.eval(&mid, &y).value();
                let gap = (bm - ((1.0 - t) * b1 + t * b2)) / scale;
                if gap > report.worst_convexity_gap {
                    report.worst_convexity_gap = gap;
                }
                if gap > CONVEXITY_TOL {
                    report.convexity_violations_x += 1;
                    push_witness(&mut report.witnesses, "convexity_x", &mid, &y, gap);
                    break;
                }
            }
        }
    }

    // (c) equivalence spot checks on graph points
    for _ in 0..counts.graph_checks {
        let pair = match &sampler.graph_points {
            Some(gen) => Some(gen(&mut rng)),
            None => {
                let x = (sampler.sample_x)(&mut rng);
                let y = (sampler.sample_y)(&mut rng);
                let gap = b.graph_gap(&x, &y);
                match gap.finite_value() {
                    Some(g) if g.abs() <= EQUIVALENCE_TOL * (1.0 + b.eval(&x, &y).value().abs()) => {
                        Some((x, y))
                    }
                    _ => None,
                }
            }
        };
        let Some((x, y)) = pair else { continue };
        let gap = b.graph_gap(&x, &y);
        let on_graph = matches!(gap.finite_value(), Some(g) if g.abs() <= EQUIVALENCE_TOL * (1.0 + b.eval(&x, &y).value().abs()));
        if !on_graph {
            continue;
        }
        report.graph_points_checked += 1;
        let probes_x = (sampler.probes_x)(&mut rng, counts.probes_per_check);
        let probes_y = (sampler.probes_y)(&mut rng, counts.probes_per_check);
        let fx = |z: &X| b.eval(z, &y);
        let ok_x = subgradient_member(fx, &x, &y, &probes_x, |z, y| b.pairing(z, y))
            .unwrap_or(false);
        let fy = |w: &Y| b.eval(&x, w);
        let ok_y = subgradient_member(fy, &y, &x, &probes_y, |w, x| b.pairing(x, w))
            .unwrap_or(false);
        if !(ok_x && ok_y) {
            report.equivalence_failures += 1;
            push_witness(
                &mut report.witnesses,
                "equivalence",
                &x,
                &y,
                gap.value(),
            );
        }
    }

    report
}

use rand::SeedableRng;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn scalar_sampler(scale: f64) -> AuditSampler<f64, f64> {
        AuditSampler {
            sample_x: Arc::new(move |rng| rng.gen_range(-scale..scale)),
            sample_y: Arc::new(move |rng| rng.gen_range(-scale..scale)),
            graph_points: Some(Arc::new(move |rng| {
                let x = rng.gen_range(-scale..scale);
                (x, x) // graph of ½x² + ½y² is {y = x}
            })),
            probes_x: Arc::new(move |rng, n| (0..n).map(|_| rng.gen_range(-scale..scale)).collect()),
            probes_y: Arc::new(move |rng, n| (0..n).map(|_| rng.gen_range(-scale..scale)).collect()),
        }
    }

    fn half_square_separable() -> Bipotential<f64, f64> {
        Bipotential::new(
            "half_square",
            |x: &f64, y: &f64| ExtendedReal::finite(0.5 * x * x + 0.5 * y * y),
            |x, y| x * y,
        )
    }

    #[test]
    fn audit_passes_for_quadratic_separable() {
        let b = half_square_separable();
        let report = axiom_audit(&b, &scalar_sampler(3.0), &AuditCounts::default(), 42);
        assert!(report.passes(), "{}", report.to_json());
        assert!(report.worst_fenchel_margin >= -FENCHEL_TOL);
    }

    #[test]
    fn audit_detects_corrupted_inequality() {
        let b = Bipotential::new(
            "corrupted",
            |x: &f64, y: &f64| ExtendedReal::finite(0.5 * x * x + 0.5 * y * y - 0.1),
            |x, y| x * y,
        );
        let report = axiom_audit(&b, &scalar_sampler(3.0), &AuditCounts::default(), 42);
        assert!(report.fenchel_violations > 0);
        assert!(!report.passes());
    }

    #[test]
    fn audit_detects_nonconvex_partial_map() {
        // concave in y: fails (a)
        let b = Bipotential::new(
            "concave_y",
            |x: &f64, y: &f64| ExtendedReal::finite(x * x + 4.0 - (y - 1.0) * (y - 1.0) * 0.01),
            |_x, _y| -10.0,
        );
        let report = axiom_audit(&b, &scalar_sampler(3.0), &AuditCounts::default(), 7);
        assert!(report.convexity_violations_y > 0);
    }

    #[test]
    fn sync_round_trip_is_pointwise_identity() {
        let b = half_square_separable();
        let c = sync_from_bipotential(&b);
        let b2 = bipotential_from_sync(&c, |x: &f64, y: &f64| x * y);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let y: f64 = rng.gen_range(-3.0..3.0);
            let v1 = b.eval(&x, &y).value();
            let v2 = b2.eval(&x, &y).value();
            assert!((v1 - v2).abs() < 1e-14 * (1.0 + v1.abs()));
        }
    }

    #[test]
    fn sync_of_elastic_like_is_half_square_of_difference() {
        let b = half_square_separable();
        let c = sync_from_bipotential(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let y: f64 = rng.gen_range(-3.0..3.0);
            let v = c.eval(&x, &y).value();
            assert!((v - 0.5 * (x - y) * (x - y)).abs() < 1e-12);
            assert!(v >= -1e-12);
        }
    }

    #[test]
    fn same_sync_two_dualities_same_graph() {
        let b = half_square_separable();
        let c = sync_from_bipotential(&b);
        let b1 = bipotential_from_sync(&c, |x: &f64, y: &f64| x * y);
        let b2 = bipotential_from_sync(&c, |x: &f64, y: &f64| 2.0 * x * y);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-3.0..3.0);
            let y: f64 = rng.gen_range(-3.0..3.0);
            let m1 = graph_membership(&b1, &x, &y, 1e-9);
            let m2 = graph_membership(&b2, &x, &y, 1e-9);
            assert_eq!(m1, m2);
        }
        // graph points themselves agree
        assert!(graph_membership(&b1, &1.5, &1.5, 1e-12));
        assert!(graph_membership(&b2, &1.5, &1.5, 1e-12));
    }

    #[test]
    fn transform_sync_preserves_zero_set() {
        let b = half_square_separable();
        let c = sync_from_bipotential(&b);
        let probes: Vec<f64> = vec![-2.0, -0.5, 0.0, 1.0, 3.0];
        let t = LinearBijection::verified(|x: &f64| 2.0 * x, |y: &f64| y / 2.0, &probes).unwrap();
        let l = LinearBijection::verified(|x: &f64| 2.0 * x, |y: &f64| y / 2.0, &probes).unwrap();
        let c2 = transform_sync(&c, t, l, 2.0).unwrap();
        // zero-set of c is {x=y}; preimage under (2x, 2y) is again {x=y}
        assert!(c2.vanishes(&1.25, &1.25, 1e-12));
        assert!(!c2.vanishes(&1.25, &1.0, 1e-12));
        // alpha = 1, identity: unchanged values
        let id1 = LinearBijection::verified(|x: &f64| *x, |y: &f64| *y, &probes).unwrap();
        let id2 = LinearBijection::verified(|x: &f64| *x, |y: &f64| *y, &probes).unwrap();
        let c3 = transform_sync(&c, id1, id2, 1.0).unwrap();
        assert!((c3.eval(&2.0, &1.0).value() - c.eval(&2.0, &1.0).value()).abs() < 1e-14);
    }

    #[test]
    fn transform_sync_rejects_bad_alpha_and_singular_map() {
        let b = half_square_separable();
        let c = sync_from_bipotential(&b);
        let probes: Vec<f64> = vec![-1.0, 0.5, 2.0];
        let t = LinearBijection::verified(|x: &f64| *x, |y: &f64| *y, &probes).unwrap();
        let l = LinearBijection::verified(|x: &f64| *x, |y: &f64| *y, &probes).unwrap();
        assert!(transform_sync(&c, t, l, 0.0).is_err());
        // singular forward map: x ↦ 0 fails the roundtrip test
        let bad = LinearBijection::verified(|_x: &f64| 0.0, |y: &f64| *y, &probes);
        assert!(bad.is_err());
        // nonlinear map fails homogeneity
        let nonlin = LinearBijection::verified(|x: &f64| x * x, |y: &f64| y.sqrt(), &[1.0, 2.0]);
        assert!(nonlin.is_err());
    }

    #[test]
    fn separable_audits_conjugate() {
        let grid: Vec<f64> = (0..=400).map(|i| -4.0 + 8.0 * i as f64 / 400.0).collect();
        let ok = separable(
            |x: &f64| ExtendedReal::finite(0.5 * x * x),
            |y: &f64| ExtendedReal::finite(0.5 * y * y),
            |x, y| x * y,
            &grid,
            &grid.iter().copied().filter(|y| y.abs() <= 2.0).collect::<Vec<_>>(),
            1e-3,
            "half_square",
        );
        assert!(ok.is_ok());
        let too_small = separable(
            |x: &f64| ExtendedReal::finite(0.5 * x * x),
            |y: &f64| ExtendedReal::finite(0.5 * y * y - 0.1),
            |x, y| x * y,
            &grid,
            &[1.0, -1.0, 0.5],
            1e-3,
            "bad",
        );
        assert!(matches!(too_small, Err(Error::ConjugateMismatch { .. })));
        let too_large = separable(
            |x: &f64| ExtendedReal::finite(0.5 * x * x),
            |y: &f64| ExtendedReal::finite(0.5 * y * y + 0.1),
            |x, y| x * y,
            &grid,
            &[1.0, -1.0, 0.5],
            1e-3,
            "bad",
        );
        assert!(matches!(too_large, Err(Error::ConjugateMismatch { .. })));
    }

    #[test]
    fn separable_cone_indicator_support_function() {
        // φ = Ψ_{x ≤ 0} on ℝ: φ* = Ψ_{y ≥ 0} (support function of a half-line);
        // the graph is the normal-cone set {x<0, y=0} ∪ {x=0, y≥0}
        let grid: Vec<f64> = (0..=400).map(|i| -4.0 + 8.0 * i as f64 / 400.0).collect();
        let b = separable(
            |x: &f64| {
                if *x <= 0.0 { ExtendedReal::ZERO } else { ExtendedReal::INFINITY }
            },
            |y: &f64| {
                if *y >= 0.0 { ExtendedReal::ZERO } else { ExtendedReal::INFINITY }
            },
            |x, y| x * y,
            &grid,
            &grid,
            1e-3,
            "half_line_indicator",
        )
        .unwrap();
        assert!(graph_membership(&b, &-2.0, &0.0, 1e-12));
        assert!(graph_membership(&b, &0.0, &3.0, 1e-12));
        // b(−2, 1) = 0 while ⟨x, y⟩ = −2: gap 2, off the graph
        assert!(!graph_membership(&b, &-2.0, &1.0, 1e-9));
        // outside dom φ
        assert!(!graph_membership(&b, &1.0, &1.0, 1e-9));
    }

    #[test]
    fn b_infinity_diagonal() {
        let m = BBGraph::new("diagonal", |x: &f64, y: &f64| (x - y).abs() == 0.0);
        let b = b_infinity(m, |x: &f64, y: &f64| x * y);
        assert_eq!(b.eval(&1.0, &1.0).value(), 1.0);
        assert!(!b.eval(&1.0, &2.0).is_finite());
        assert!(graph_membership(&b, &1.0, &1.0, 0.0));
        assert!(!graph_membership(&b, &1.0, &2.0, 1e-6));
    }

    #[test]
    fn maximal_monotone_graph_two_distinct_bipotentials() {
        // {y = x} is the graph of both the separable ½x²+½y² and of b∞
        let m = BBGraph::new("diagonal", |x: &f64, y: &f64| x == y);
        let binf = b_infinity(m, |x: &f64, y: &f64| x * y);
        let bsep = half_square_separable();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-2.0..2.0);
            assert_eq!(
                graph_membership(&binf, &x, &x, 1e-12),
                graph_membership(&bsep, &x, &x, 1e-12)
            );
        }
        // off the graph the two differ: separable finite, b∞ infinite
        assert!(bsep.eval(&0.0, &1.0).is_finite());
        assert!(!binf.eval(&0.0, &1.0).is_finite());
    }
}
