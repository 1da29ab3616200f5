//! Desk-scale spatial setting: a material-point driver and a small structured
//! plane-strain mesh of 4-node quadrilaterals with 2×2 Gauss quadrature.
//!
//! The mesh carries the strain operator D, the quadrature rule behind every
//! integral (bifunctional, duality, load forms), the Dirichlet mask, and
//! operator assembly for the solver's Newton step. Out-of-plane components
//! ride inside `SymTensor` so the cone formulas stay three-dimensional.
//!
//! All loops run in a canonical element-major, point-minor order; no float
//! accumulation depends on hash ordering, so runs are bit-reproducible.

use crate::convex::ExtendedReal;
use crate::materials::{project_stress, DruckerPragerParams, ElasticModuli};
use crate::tensor::{duality, SymTensor};
use crate::timestepping::IncrementalLaw;
use crate::Error;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const GAUSS: f64 = 0.577_350_269_189_625_8; // 1/√3

/// Named edge of the structured rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

/// Per-edge Dirichlet specification; values are per unit boundary scale.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EdgeDirichlet {
    pub edge: Edge,
    #[serde(default)]
    pub ux: Option<f64>,
    #[serde(default)]
    pub uy: Option<f64>,
}

/// Per-edge traction; components are per unit load scale.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EdgeTraction {
    pub edge: Edge,
    #[serde(default)]
    pub tx: f64,
    #[serde(default)]
    pub ty: f64,
}

struct QuadPoint {
    /// Shape values N_a at this Gauss point.
    n: [f64; 4],
    /// Cartesian shape gradients (dN_a/dx, dN_a/dy).
    grad: [[f64; 2]; 4],
    /// Gauss weight times |J|.
    w_det: f64,
}

struct MeshData {
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 4]>,
    quad: Vec<[QuadPoint; 4]>,
    mask: Vec<bool>,
    dirichlet: Vec<EdgeDirichlet>,
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

enum Kind {
    MaterialPoint,
    Mesh(MeshData),
}

/// Spatial discretization: a single material point (no equilibrium) or a
/// structured plane-strain quadrilateral mesh.
pub struct Discretization {
    kind: Kind,
}

impl Discretization {
    /// Zero-dimensional body: one quadrature point of unit weight, no dofs.
    pub fn material_point() -> Self {
        Discretization { kind: Kind::MaterialPoint }
    }

    /// Structured nx×ny rectangle of size lx×ly with per-edge Dirichlet masks.
    pub fn structured(
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        dirichlet: &[EdgeDirichlet],
    ) -> Result<Self, Error> {
        if nx == 0 || ny == 0 || nx > 64 || ny > 64 {
            return Err(Error::InvalidParameter(format!(
                "mesh size must be within 1..=64 per side, got {nx}×{ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidParameter("mesh extents must be positive".into()));
        }
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
            }
        }
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let n00 = j * (nx + 1) + i;
                elements.push([n00, n00 + 1, n00 + nx + 2, n00 + nx + 1]);
            }
        }
        let mut mask = vec![false; 2 * nodes.len()];
        for spec in dirichlet {
            for (n, _) in edge_nodes(nx, ny, spec.edge) {
                if spec.ux.is_some() {
                    mask[2 * n] = true;
                }
                if spec.uy.is_some() {
                    mask[2 * n + 1] = true;
                }
            }
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidParameter(
                "mesh mode needs a nonempty Dirichlet mask (rigid modes)".into(),
            ));
        }
        let quad = build_quadrature(&nodes, &elements)?;
        Ok(Discretization {
            kind: Kind::Mesh(MeshData {
                nodes,
                elements,
                quad,
                mask,
                dirichlet: dirichlet.to_vec(),
                nx,
                ny,
                lx,
                ly,
            }),
        })
    }

    /// Mesh from raw node/element lists (tests: renumbering invariance).
    pub fn from_mesh(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 4]>,
        mask: Vec<bool>,
    ) -> Result<Self, Error> {
        if mask.len() != 2 * nodes.len() {
            return Err(Error::InvalidParameter("mask length must be 2·nodes".into()));
        }
        let quad = build_quadrature(&nodes, &elements)?;
        Ok(Discretization {
            kind: Kind::Mesh(MeshData {
                nodes,
                elements,
                quad,
                mask,
                dirichlet: Vec::new(),
                nx: 0,
                ny: 0,
                lx: 0.0,
                ly: 0.0,
            }),
        })
    }

    pub fn is_material_point(&self) -> bool {
        matches!(self.kind, Kind::MaterialPoint)
    }

    pub fn num_nodes(&self) -> usize {
        match &self.kind {
            Kind::MaterialPoint => 0,
            Kind::Mesh(m) => m.nodes.len(),
        }
    }

    pub fn num_dofs(&self) -> usize {
        2 * self.num_nodes()
    }

    pub fn num_points(&self) -> usize {
        match &self.kind {
            Kind::MaterialPoint => 1,
            Kind::Mesh(m) => 4 * m.elements.len(),
        }
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        match &self.kind {
            Kind::MaterialPoint => &[],
            Kind::Mesh(m) => &m.nodes,
        }
    }

    /// Per-dof Dirichlet mask (empty for the material point).
    pub fn dirichlet_mask(&self) -> &[bool] {
        match &self.kind {
            Kind::MaterialPoint => &[],
            Kind::Mesh(m) => &m.mask,
        }
    }

    /// Prescribed-value vector for the stored edge specs at a boundary scale.
    pub fn dirichlet_values(&self, scale: f64) -> Vec<f64> {
        match &self.kind {
            Kind::MaterialPoint => Vec::new(),
            Kind::Mesh(m) => {
                let mut v = vec![0.0; 2 * m.nodes.len()];
                for spec in &m.dirichlet {
                    for (n, _) in edge_nodes(m.nx, m.ny, spec.edge) {
                        if let Some(ux) = spec.ux {
                            v[2 * n] = scale * ux;
                        }
                        if let Some(uy) = spec.uy {
                            v[2 * n + 1] = scale * uy;
                        }
                    }
                }
                v
            }
        }
    }

    /// Symmetric gradient at every quadrature point (plane strain embedding).
    pub fn strain_op(&self, u: &[f64]) -> Result<Vec<SymTensor>, Error> {
        match &self.kind {
            Kind::MaterialPoint => Ok(vec![SymTensor::ZERO]),
            Kind::Mesh(m) => {
                if u.len() != 2 * m.nodes.len() {
                    return Err(Error::InvalidParameter(format!(
                        "displacement length {} does not match {} dofs",
                        u.len(),
                        2 * m.nodes.len()
                    )));
                }
                let mut out = Vec::with_capacity(4 * m.elements.len());
                for (e, conn) in m.elements.iter().enumerate() {
                    for qp in &m.quad[e] {
                        let mut e11 = 0.0;
                        let mut e22 = 0.0;
                        let mut e12 = 0.0;
                        for a in 0..4 {
                            let (ux, uy) = (u[2 * conn[a]], u[2 * conn[a] + 1]);
                            e11 += qp.grad[a][0] * ux;
                            e22 += qp.grad[a][1] * uy;
                            e12 += 0.5 * (qp.grad[a][1] * ux + qp.grad[a][0] * uy);
                        }
                        out.push(SymTensor::from_plane(e11, e22, 0.0, e12));
                    }
                }
                Ok(out)
            }
        }
    }

    /// Quadrature weights w·|J| in canonical point order.
    pub fn weights(&self) -> Vec<f64> {
        match &self.kind {
            Kind::MaterialPoint => vec![1.0],
            Kind::Mesh(m) => m
                .quad
                .iter()
                .flat_map(|e| e.iter().map(|qp| qp.w_det))
                .collect(),
        }
    }

    /// B(ε, σ) = Σ_q w|J|·b(q, ε_q, σ_q); +∞ saturates.
    pub fn bifunctional(
        &self,
        b: impl Fn(usize, &SymTensor, &SymTensor) -> ExtendedReal,
        eps: &[SymTensor],
        sig: &[SymTensor],
    ) -> ExtendedReal {
        let mut total = 0.0f64;
        for (q, w) in self.weights().iter().enumerate() {
            match b(q, &eps[q], &sig[q]).finite_value() {
                Some(v) => total += w * v,
                None => return ExtendedReal::INFINITY,
            }
        }
        ExtendedReal::finite(total)
    }

    /// ⟨ε, σ⟩₁ = Σ_q w|J|·tr(ε_q σ_q).
    pub fn duality_integral(&self, eps: &[SymTensor], sig: &[SymTensor]) -> f64 {
        self.weights()
            .iter()
            .enumerate()
            .map(|(q, w)| w * duality(&eps[q], &sig[q]))
            .sum()
    }

    /// Σ_q w|J|·‖σ_q‖: stress scale for residual normalization.
    pub fn stress_l1(&self, sig: &[SymTensor]) -> f64 {
        self.weights()
            .iter()
            .enumerate()
            .map(|(q, w)| w * sig[q].norm())
            .sum()
    }

    /// Raw internal-force vector g_i = Σ_q w|J|·⟨σ_q, D(φ_i)_q⟩ (unmasked).
    pub fn internal_force(&self, sig: &[SymTensor]) -> Result<Vec<f64>, Error> {
        match &self.kind {
            Kind::MaterialPoint => Ok(Vec::new()),
            Kind::Mesh(m) => {
                if sig.len() != 4 * m.elements.len() {
                    return Err(Error::InvalidParameter(
                        "stress field length does not match quadrature points".into(),
                    ));
                }
                let mut g = vec![0.0; 2 * m.nodes.len()];
                let mut q = 0;
                for (e, conn) in m.elements.iter().enumerate() {
                    for qp in &m.quad[e] {
                        let s = &sig[q];
                        let c = s.components();
                        for a in 0..4 {
                            let (dx, dy) = (qp.grad[a][0], qp.grad[a][1]);
                            // ⟨σ, B⟩ with B the shape-strain tensor of each dof
                            g[2 * conn[a]] += qp.w_det * (c[0] * dx + c[3] * dy);
                            g[2 * conn[a] + 1] += qp.w_det * (c[1] * dy + c[3] * dx);
                        }
                        q += 1;
                    }
                }
                Ok(g)
            }
        }
    }

    /// Zeroes Dirichlet-masked components in place.
    pub fn apply_mask(&self, v: &mut [f64]) {
        for (x, &m) in v.iter_mut().zip(self.dirichlet_mask()) {
            if m {
                *x = 0.0;
            }
        }
    }

    /// max over free dofs of the weak-equilibrium residual of σ against zero
    /// loads, normalized by the stress scale: the SA(0,0) membership measure.
    pub fn sa_residual(&self, sig: &[SymTensor]) -> Result<f64, Error> {
        let mut f = self.internal_force(sig)?;
        self.apply_mask(&mut f);
        let worst = f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        Ok(worst / (1.0 + self.stress_l1(sig)))
    }

    /// Chain rule of the bifunctional through D: nodal gradient of
    /// v ↦ Σ w|J| b(D(v)) given the per-point stress-like gradient ∂_ε b.
    /// Entries at Dirichlet-masked dofs are zero.
    pub fn bifunctional_grad_u(
        &self,
        u: &[f64],
        point_grad: impl Fn(usize, &SymTensor) -> Result<SymTensor, Error>,
    ) -> Result<Vec<f64>, Error> {
        let strains = self.strain_op(u)?;
        let mut sig = Vec::with_capacity(strains.len());
        for (q, eps_q) in strains.iter().enumerate() {
            sig.push(point_grad(q, eps_q).map_err(|e| Error::PointFailure {
                point: q,
                source: Box::new(e),
            })?);
        }
        let mut g = self.internal_force(&sig)?;
        self.apply_mask(&mut g);
        Ok(g)
    }

    /// Assembles the symmetric operator K_ij = Σ_q w|J|·⟨C_q(B_j), B_i⟩ from a
    /// per-point tangent applied as a linear map. Masked rows/columns are
    /// replaced by the identity.
    pub fn assemble_operator(
        &self,
        tangent: impl Fn(usize, &SymTensor) -> SymTensor,
    ) -> Result<DMatrix<f64>, Error> {
        let Kind::Mesh(m) = &self.kind else {
            return Err(Error::InvalidParameter(
                "operator assembly needs a mesh discretization".into(),
            ));
        };
        let n = 2 * m.nodes.len();
        let mut k = DMatrix::zeros(n, n);
        let mut q = 0;
        for (e, conn) in m.elements.iter().enumerate() {
            for qp in &m.quad[e] {
                // shape-strain tensors of the 8 local dofs
                let mut b_tensors = [[SymTensor::ZERO; 2]; 4];
                for a in 0..4 {
                    let (dx, dy) = (qp.grad[a][0], qp.grad[a][1]);
                    b_tensors[a][0] = SymTensor::from_plane(dx, 0.0, 0.0, 0.5 * dy);
                    b_tensors[a][1] = SymTensor::from_plane(0.0, dy, 0.0, 0.5 * dx);
                }
                for a in 0..4 {
                    for ca in 0..2 {
                        let cb_t = tangent(q, &b_tensors[a][ca]);
                        let row = 2 * conn[a] + ca;
                        for b in 0..4 {
                            for cb in 0..2 {
                                let col = 2 * conn[b] + cb;
                                k[(col, row)] += qp.w_det * duality(&b_tensors[b][cb], &cb_t);
                            }
                        }
                    }
                }
                q += 1;
            }
        }
        // symmetrize (regions with rank structure can round asymmetrically)
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (k[(i, j)] + k[(j, i)]);
                k[(i, j)] = s;
                k[(j, i)] = s;
            }
        }
        for (i, &masked) in m.mask.iter().enumerate() {
            if masked {
                for j in 0..n {
                    k[(i, j)] = 0.0;
                    k[(j, i)] = 0.0;
                }
                k[(i, i)] = 1.0;
            }
        }
        Ok(k)
    }

    /// Linear-elastic stiffness (tangent = S everywhere).
    pub fn elastic_stiffness(&self, moduli: &ElasticModuli) -> Result<DMatrix<f64>, Error> {
        self.assemble_operator(|_, b| moduli.apply_s(b))
    }

    /// Assembled load form: body force over elements plus edge tractions
    /// (two-node lumping, exact for constant tractions).
    pub fn assemble_loads(&self, body: [f64; 2], tractions: &[EdgeTraction]) -> Vec<f64> {
        let Kind::Mesh(m) = &self.kind else {
            return Vec::new();
        };
        let mut f = vec![0.0; 2 * m.nodes.len()];
        if body != [0.0, 0.0] {
            for (e, conn) in m.elements.iter().enumerate() {
                for qp in &m.quad[e] {
                    for a in 0..4 {
                        f[2 * conn[a]] += qp.w_det * qp.n[a] * body[0];
                        f[2 * conn[a] + 1] += qp.w_det * qp.n[a] * body[1];
                    }
                }
            }
        }
        for tr in tractions {
            let segs = edge_segments(m.nx, m.ny, tr.edge);
            let seg_len = match tr.edge {
                Edge::Left | Edge::Right => m.ly / m.ny as f64,
                Edge::Bottom | Edge::Top => m.lx / m.nx as f64,
            };
            for (n0, n1) in segs {
                for n in [n0, n1] {
                    f[2 * n] += 0.5 * seg_len * tr.tx;
                    f[2 * n + 1] += 0.5 * seg_len * tr.ty;
                }
            }
        }
        f
    }
}

fn edge_nodes(nx: usize, ny: usize, edge: Edge) -> Vec<(usize, usize)> {
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    match edge {
        Edge::Left => (0..=ny).map(|j| (idx(0, j), j)).collect(),
        Edge::Right => (0..=ny).map(|j| (idx(nx, j), j)).collect(),
        Edge::Bottom => (0..=nx).map(|i| (idx(i, 0), i)).collect(),
        Edge::Top => (0..=nx).map(|i| (idx(i, ny), i)).collect(),
    }
}

fn edge_segments(nx: usize, ny: usize, edge: Edge) -> Vec<(usize, usize)> {
    let nodes = edge_nodes(nx, ny, edge);
    nodes.windows(2).map(|w| (w[0].0, w[1].0)).collect()
}

fn build_quadrature(
    nodes: &[[f64; 2]],
    elements: &[[usize; 4]],
) -> Result<Vec<[QuadPoint; 4]>, Error> {
    let gauss_pts = [
        (-GAUSS, -GAUSS),
        (GAUSS, -GAUSS),
        (GAUSS, GAUSS),
        (-GAUSS, GAUSS),
    ];
    let corners: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut out = Vec::with_capacity(elements.len());
    for (e, conn) in elements.iter().enumerate() {
        let xy: Vec<[f64; 2]> = conn.iter().map(|&n| nodes[n]).collect();
        let mut qps: Vec<QuadPoint> = Vec::with_capacity(4);
        for &(xi, eta) in &gauss_pts {
            let mut n = [0.0; 4];
            let mut dn = [[0.0; 2]; 4]; // dN/dξ, dN/dη
            for a in 0..4 {
                let (xa, ea) = corners[a];
                n[a] = 0.25 * (1.0 + xa * xi) * (1.0 + ea * eta);
                dn[a][0] = 0.25 * xa * (1.0 + ea * eta);
                dn[a][1] = 0.25 * ea * (1.0 + xa * xi);
            }
            // J_ij = ∂x_i/∂ξ_j
            let mut j = [[0.0; 2]; 2];
            for a in 0..4 {
                j[0][0] += xy[a][0] * dn[a][0];
                j[0][1] += xy[a][0] * dn[a][1];
                j[1][0] += xy[a][1] * dn[a][0];
                j[1][1] += xy[a][1] * dn[a][1];
            }
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det <= 0.0 {
                return Err(Error::DegenerateElement { element: e });
            }
            let inv = [
                [j[1][1] / det, -j[0][1] / det],
                [-j[1][0] / det, j[0][0] / det],
            ];
            let mut grad = [[0.0; 2]; 4];
            for a in 0..4 {
                // ∂N/∂x_i = Σ_j (J⁻¹)_{ji} ∂N/∂ξ_j
                grad[a][0] = inv[0][0] * dn[a][0] + inv[1][0] * dn[a][1];
                grad[a][1] = inv[0][1] * dn[a][0] + inv[1][1] * dn[a][1];
            }
            qps.push(QuadPoint { n, grad, w_det: det });
        }
        out.push(match <[QuadPoint; 4]>::try_from(qps) {
            Ok(arr) => arr,
            Err(_) => unreachable!(),
        });
    }
    Ok(out)
}

/// Per-point fixed-point solve settings for the material-point driver.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PointSolveConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PointSolveConfig {
    fn default() -> Self {
        PointSolveConfig { tol: 1e-13, max_iter: 500 }
    }
}

/// History entry of the material-point driver.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PointState {
    pub t: f64,
    pub eps: SymTensor,
    pub eps_e: SymTensor,
    pub eps_p: SymTensor,
    pub sig: SymTensor,
    /// Normalized graph gap of b_{p,k} at the accepted increment.
    pub graph_gap: f64,
    pub iterations: usize,
}

/// Drives one material point along a prescribed total-strain path, solving
/// at each step for Δσ with (Δε − S⁻¹Δσ, Δσ) on the graph of b_{p,k} by
/// fixed-point iteration of the local map Δσ ← ∂_ε Δb_k(Δε, Δσ), with each
/// iterate projected into K_stress (the projected-algorithm idea pointwise,
/// which also makes every Δb_k evaluation finite).
pub fn material_point_driver(
    path: &[SymTensor],
    moduli: &ElasticModuli,
    params: &DruckerPragerParams,
    dt_schedule: &[f64],
    cfg: &PointSolveConfig,
) -> Result<Vec<PointState>, Error> {
    if path.is_empty() || path[0].norm() != 0.0 {
        return Err(Error::InvalidParameter(
            "strain path must start at the zero tensor".into(),
        ));
    }
    if dt_schedule.len() != path.len() - 1 {
        return Err(Error::InvalidParameter(format!(
            "dt schedule length {} must be path length − 1 = {}",
            dt_schedule.len(),
            path.len() - 1
        )));
    }
    let mut history = vec![PointState {
        t: 0.0,
        eps: SymTensor::ZERO,
        eps_e: SymTensor::ZERO,
        eps_p: SymTensor::ZERO,
        sig: SymTensor::ZERO,
        graph_gap: 0.0,
        iterations: 0,
    }];
    let mut t = 0.0;
    for (k, &dt) in dt_schedule.iter().enumerate() {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        let prev = *history.last().expect("nonempty history");
        let deps = path[k + 1].sub(&path[k]);
        let law = IncrementalLaw::new(*moduli, *params, dt, prev.sig);
        // projected elastic trial
        let trial = prev.sig.add(&moduli.apply_s(&deps));
        let mut dsig = project_stress(params, &trial).sub(&prev.sig);
        let mut iterations = 0;
        let mut gap_norm;
        loop {
            iterations += 1;
            let grad = law.grad_eps(&deps, &dsig).map_err(|e| Error::PointFailure {
                point: k,
                source: Box::new(e),
            })?;
            let next_total = project_stress(params, &prev.sig.add(&grad));
            let candidate = next_total.sub(&prev.sig);
            let update = candidate.sub(&dsig).norm() / (1.0 + dsig.norm());
            dsig = candidate;
            let gap = law
                .graph_gap(&deps, &dsig)
                .map_err(|e| Error::PointFailure { point: k, source: Box::new(e) })?;
            gap_norm = match gap.finite_value() {
                Some(g) => g.abs() / (1.0 + duality(&deps, &dsig).abs()),
                None => f64::MAX,
            };
            if update.max(gap_norm) <= cfg.tol {
                break;
            }
            if iterations >= cfg.max_iter {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: update.max(gap_norm),
                });
            }
        }
        let d = law.delta_b(&deps, &dsig).map_err(|e| Error::PointFailure {
            point: k,
            source: Box::new(e),
        })?;
        let split = d.split.ok_or(Error::InfiniteValue {
            context: "accepted increment has inadmissible stress",
        })?;
        t += dt;
        history.push(PointState {
            t,
            eps: path[k + 1],
            eps_e: prev.eps_e.add(&split.elastic),
            eps_p: prev.eps_p.add(&split.plastic),
            sig: prev.sig.add(&dsig),
            graph_gap: gap_norm,
            iterations,
        });
    }
    Ok(history)
}
