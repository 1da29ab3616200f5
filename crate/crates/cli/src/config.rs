//! Scenario configuration: JSON schema, parsing and whole-file validation.
//!
//! Validation collects every violation with its field path instead of
//! stopping at the first, so a config round-trip fixes everything at once.

use bipotential::{
    DruckerPragerParams, EdgeDirichlet, EdgeTraction, ElasticModuli, Init, ScheduleEntry,
    SolverConfig, SymTensor, Variant,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Audit,
    Point,
    Mesh,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "audit" => Ok(Mode::Audit),
            "point" => Ok(Mode::Point),
            "mesh" => Ok(Mode::Mesh),
            other => Err(format!("unknown mode {other:?} (audit|point|mesh)")),
        }
    }
}

/// Material block: angles in degrees (soil-mechanics convention); stored in
/// radians internally.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MaterialConfig {
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
    pub phi_deg: f64,
    pub theta_deg: f64,
    pub k_d: f64,
}

impl MaterialConfig {
    pub fn moduli(&self) -> Result<ElasticModuli, bipotential::Error> {
        ElasticModuli::new(self.lambda, self.mu)
    }

    pub fn params(&self) -> Result<DruckerPragerParams, bipotential::Error> {
        DruckerPragerParams::new(
            self.c,
            self.phi_deg.to_radians(),
            self.theta_deg.to_radians(),
            self.k_d,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dirichlet: Vec<EdgeDirichlet>,
    #[serde(default)]
    pub tractions: Vec<EdgeTraction>,
    #[serde(default)]
    pub body_force: [f64; 2],
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverBlock {
    pub variant: Variant,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub weak_samples: usize,
    pub init: Init,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverBlock {
            variant: d.variant,
            outer_tol: d.outer_tol,
            max_outer: d.max_outer,
            inner_tol: d.inner_tol,
            max_inner: d.max_inner,
            weak_samples: d.weak_samples,
            init: d.init,
        }
    }
}

impl SolverBlock {
    pub fn to_solver_config(self) -> SolverConfig {
        SolverConfig {
            variant: self.variant,
            outer_tol: self.outer_tol,
            max_outer: self.max_outer,
            inner_tol: self.inner_tol,
            max_inner: self.max_inner,
            weak_samples: self.weak_samples,
            init: self.init,
        }
    }
}

/// Audit-mode sample volumes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditBlock {
    pub pairs: usize,
    pub segments: usize,
    pub graph_checks: usize,
    pub probes_per_check: usize,
    /// Strain/rate sampling scale.
    pub scale: f64,
    /// Members of the shifted family b_{p,k} to audit (random σ_k, Δt each).
    pub shifted_members: usize,
}

impl Default for AuditBlock {
    fn default() -> Self {
        AuditBlock {
            pairs: 25_000,
            segments: 500,
            graph_checks: 100,
            probes_per_check: 64,
            scale: 1.0,
            shifted_members: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub material: MaterialConfig,
    #[serde(default)]
    pub mesh: Option<MeshConfig>,
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
    /// Point mode: absolute strain states (6 components each), starting at 0.
    #[serde(default)]
    pub strain_path: Vec<[f64; 6]>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub audit: AuditBlock,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

impl ScenarioConfig {
    pub fn strain_path_tensors(&self) -> Vec<SymTensor> {
        self.strain_path
            .iter()
            .map(|c| SymTensor::from_components(*c))
            .collect()
    }

    /// Validates everything, returning the full list of violations.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        let m = &self.material;
        if !(m.mu > 0.0) {
            errs.push(format!("material.mu: must be > 0, got {}", m.mu));
        }
        if !(3.0 * m.lambda + 2.0 * m.mu > 0.0) {
            errs.push(format!(
                "material.lambda: 3λ + 2μ must be > 0, got λ={}, μ={}",
                m.lambda, m.mu
            ));
        }
        if !(m.c > 0.0) {
            errs.push(format!("material.c: cohesion must be > 0, got {}", m.c));
        }
        if !(m.phi_deg > 0.0 && m.phi_deg < 90.0) {
            errs.push(format!(
                "material.phi_deg: friction angle must lie in (0, 90), got {}",
                m.phi_deg
            ));
        }
        if !(m.theta_deg >= 0.0 && m.theta_deg <= m.phi_deg) {
            errs.push(format!(
                "material.theta_deg: Drücker-Prager constraint 0 ≤ θ ≤ φ violated, got θ={}, φ={}",
                m.theta_deg, m.phi_deg
            ));
        }
        if !(m.k_d > 0.0) {
            errs.push(format!("material.k_d: must be > 0, got {}", m.k_d));
        }
        let s = &self.solver;
        if !(s.outer_tol > 0.0) {
            errs.push(format!("solver.outer_tol: must be > 0, got {}", s.outer_tol));
        }
        if !(s.inner_tol > 0.0) {
            errs.push(format!("solver.inner_tol: must be > 0, got {}", s.inner_tol));
        }
        if s.max_outer == 0 {
            errs.push("solver.max_outer: must be ≥ 1".into());
        }
        if s.max_inner == 0 {
            errs.push("solver.max_inner: must be ≥ 1".into());
        }
        match self.mode {
            Mode::Audit => {}
            Mode::Point => {
                if self.strain_path.len() < 2 {
                    errs.push("strain_path: point mode needs at least two states".into());
                } else if self.strain_path[0] != [0.0; 6] {
                    errs.push("strain_path[0]: path must start at the zero tensor".into());
                }
                if self.schedule.is_empty() {
                    errs.push("schedule: must be nonempty in point mode".into());
                } else if self.schedule.len() != 1
                    && self.schedule.len() + 1 != self.strain_path.len()
                {
                    errs.push(format!(
                        "schedule: length {} must be 1 (broadcast dt) or strain_path length − 1 = {}",
                        self.schedule.len(),
                        self.strain_path.len().max(1) - 1
                    ));
                }
                for (i, e) in self.schedule.iter().enumerate() {
                    if !(e.dt > 0.0) {
                        errs.push(format!("schedule[{i}].dt: must be > 0, got {}", e.dt));
                    }
                }
            }
            Mode::Mesh => {
                match &self.mesh {
                    None => errs.push("mesh: required in mesh mode".into()),
                    Some(mesh) => {
                        if mesh.nx == 0 || mesh.ny == 0 || mesh.nx > 64 || mesh.ny > 64 {
                            errs.push(format!(
                                "mesh.nx/ny: must lie in 1..=64, got {}×{}",
                                mesh.nx, mesh.ny
                            ));
                        }
                        if !(mesh.lx > 0.0 && mesh.ly > 0.0) {
                            errs.push("mesh.lx/ly: extents must be positive".into());
                        }
                        if mesh.dirichlet.is_empty() {
                            errs.push(
                                "mesh.dirichlet: nonempty Dirichlet set required (rigid modes)"
                                    .into(),
                            );
                        }
                    }
                }
                if self.schedule.is_empty() {
                    errs.push("schedule: must be nonempty in mesh mode".into());
                }
                for (i, e) in self.schedule.iter().enumerate() {
                    if !(e.dt > 0.0) {
                        errs.push(format!("schedule[{i}].dt: must be > 0, got {}", e.dt));
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

}

/// Parses the JSON text, reporting a parse error with position or every
/// validation violation.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, Vec<String>> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        vec![format!(
            "parse error at line {}, column {}: {}",
            e.line(),
            e.column(),
            e
        )]
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_POINT: &str = r#"{
        "mode": "point",
        "material": {"lambda": 1000.0, "mu": 800.0, "c": 2.0,
                     "phi_deg": 30.0, "theta_deg": 10.0, "k_d": 0.9},
        "schedule": [{"dt": 0.1, "boundary_scale": 0.0, "load_scale": 0.0}],
        "strain_path": [[0,0,0,0,0,0],[0.001,0,0,0,0,0]]
    }"#;

    #[test]
    fn minimal_point_config_parses() {
        let cfg = parse_config(MINIMAL_POINT).unwrap();
        assert_eq!(cfg.mode, Mode::Point);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn theta_above_phi_is_named_violation() {
        let bad = MINIMAL_POINT.replace("\"theta_deg\": 10.0", "\"theta_deg\": 40.0");
        let errs = parse_config(&bad).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("0 ≤ θ ≤ φ")), "{errs:?}");
    }

    #[test]
    fn missing_field_is_reported() {
        let bad = MINIMAL_POINT.replace("\"k_d\": 0.9", "\"k_d_typo\": 0.9");
        let errs = parse_config(&bad).unwrap_err();
        assert!(errs[0].contains("k_d"), "{errs:?}");
    }

    #[test]
    fn all_violations_are_collected() {
        let bad = MINIMAL_POINT
            .replace("\"c\": 2.0", "\"c\": -1.0")
            .replace("\"mu\": 800.0", "\"mu\": 0.0")
            .replace("\"theta_deg\": 10.0", "\"theta_deg\": 40.0");
        let errs = parse_config(&bad).unwrap_err();
        assert!(errs.len() >= 3, "{errs:?}");
    }
}
