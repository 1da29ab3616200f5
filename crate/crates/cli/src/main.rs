//! Batch front end: `bipo --config scenario.json --out results/`.
//!
//! Modes: `audit` writes axiom-audit reports for the four constitutive
//! bipotentials; `point` drives a material point along a strain path and
//! writes the state history as CSV; `mesh` runs the quasistatic evolution on
//! a structured plane-strain mesh and writes state summaries, iteration
//! traces and weak-inequality margins. Identical config + seed give
//! byte-identical outputs.
//!
//! Exit codes: 0 success, 2 config error, 3 solver non-convergence,
//! 4 internal error.

// negated comparisons are deliberate NaN guards
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use bipotential::{
    axiom_audit, material_point_driver, run_evolution, sampling, AuditCounts, Discretization,
    EvolutionRecord, IterationRecord, LoadTemplate, PointSolveConfig, StepState, SymTensor,
};
use clap::Parser;
use config::{parse_config, Mode, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "bipo", about = "Bipotential plasticity scenarios: audit, point and mesh runs")]
struct Args {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Override the config's mode.
    #[arg(long)]
    mode: Option<Mode>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the solver's outer tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

fn run(args: &Args) -> Result<(), u8> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        eprintln!("config error: cannot read {}: {e}", args.config.display());
        EXIT_CONFIG
    })?;
    let mut cfg = parse_config(&text).map_err(|errs| {
        eprintln!("config error: {} violation(s):", errs.len());
        for e in &errs {
            eprintln!("  - {e}");
        }
        EXIT_CONFIG
    })?;
    if let Some(mode) = args.mode {
        cfg.mode = mode;
        cfg.validate().map_err(|errs| {
            eprintln!("config error after --mode override:");
            for e in &errs {
                eprintln!("  - {e}");
            }
            EXIT_CONFIG
        })?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = args.tol {
        if !(tol > 0.0) {
            eprintln!("config error: --tol must be > 0, got {tol}");
            return Err(EXIT_CONFIG);
        }
        cfg.solver.outer_tol = tol;
    }
    fs::create_dir_all(&args.out).map_err(|e| {
        eprintln!("internal error: cannot create {}: {e}", args.out.display());
        EXIT_INTERNAL
    })?;
    write_manifest(&args.out, &cfg)?;
    match cfg.mode {
        Mode::Audit => run_audit(&args.out, &cfg),
        Mode::Point => run_point(&args.out, &cfg),
        Mode::Mesh => run_mesh(&args.out, &cfg),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    mode: Mode,
    seed: u64,
    config: &'a ScenarioConfig,
}

fn write_manifest(out: &Path, cfg: &ScenarioConfig) -> Result<(), u8> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode,
        seed: cfg.seed,
        config: cfg,
    };
    write_file(
        &out.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serialization"),
    )
}

fn write_file(path: &Path, content: &str) -> Result<(), u8> {
    fs::write(path, content).map_err(|e| {
        eprintln!("internal error: cannot write {}: {e}", path.display());
        EXIT_INTERNAL
    })
}

/// 17-significant-digit scientific formatting: exact f64 round-trips.
fn num(v: f64) -> String {
    let v = if v.is_finite() { v } else { f64::MAX };
    format!("{v:.16e}")
}

fn material(cfg: &ScenarioConfig) -> Result<(bipotential::ElasticModuli, bipotential::DruckerPragerParams), u8> {
    let moduli = cfg.material.moduli().map_err(|e| {
        eprintln!("config error: {e}");
        EXIT_CONFIG
    })?;
    let params = cfg.material.params().map_err(|e| {
        eprintln!("config error: {e}");
        EXIT_CONFIG
    })?;
    Ok((moduli, params))
}

fn run_audit(out: &Path, cfg: &ScenarioConfig) -> Result<(), u8> {
    let (moduli, params) = material(cfg)?;
    let counts = AuditCounts {
        pairs: cfg.audit.pairs,
        segments: cfg.audit.segments,
        graph_checks: cfg.audit.graph_checks,
        probes_per_check: cfg.audit.probes_per_check,
    };
    let scale = cfg.audit.scale;
    let mut summaries = Vec::new();

    let b_e = bipotential::materials::elastic_bipotential_object(moduli);
    let report = axiom_audit(&b_e, &sampling::elastic_sampler(moduli, scale), &counts, cfg.seed);
    summaries.push((String::from("b_e"), report.passes()));
    write_file(&out.join("b_e.audit.json"), &report.to_json())?;

    let b_pp = bipotential::materials::dp_bipotential_prime_object(params);
    let report = axiom_audit(&b_pp, &sampling::dp_prime_sampler(params, scale), &counts, cfg.seed);
    summaries.push((String::from("b_p_prime"), report.passes()));
    write_file(&out.join("b_p_prime.audit.json"), &report.to_json())?;

    let b_p = bipotential::materials::dp_bipotential_object(params);
    let report = axiom_audit(&b_p, &sampling::dp_sampler(params, scale), &counts, cfg.seed);
    summaries.push((String::from("b_p"), report.passes()));
    write_file(&out.join("b_p.audit.json"), &report.to_json())?;

    // shifted family: several members with random previous stress and dt
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1000));
    let mut family = Vec::new();
    for i in 0..cfg.audit.shifted_members.max(1) {
        let (b_pk, sampler) = sampling::shifted_family_member(params, &mut rng, scale);
        let report = axiom_audit(&b_pk, &sampler, &counts, cfg.seed.wrapping_add(i as u64));
        summaries.push((format!("b_pk[{i}]"), report.passes()));
        family.push(report);
    }
    let family_json = serde_json::to_string_pretty(&family).expect("audit serialization");
    write_file(&out.join("b_pk.audit.json"), &family_json)?;

    for (name, pass) in &summaries {
        println!("audit {name}: {}", if *pass { "pass" } else { "VIOLATIONS" });
    }
    Ok(())
}

fn run_point(out: &Path, cfg: &ScenarioConfig) -> Result<(), u8> {
    let (moduli, params) = material(cfg)?;
    let path = cfg.strain_path_tensors();
    let dts: Vec<f64> = if cfg.schedule.len() == 1 {
        vec![cfg.schedule[0].dt; path.len() - 1]
    } else {
        cfg.schedule.iter().map(|e| e.dt).collect()
    };
    let point_cfg = PointSolveConfig {
        tol: cfg.solver.outer_tol.min(1e-12),
        max_iter: cfg.solver.max_outer.max(500),
    };
    let history = match material_point_driver(&path, &moduli, &params, &dts, &point_cfg) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("solver failure in point mode: {e}");
            return Err(exit_code_for(&e));
        }
    };
    let mut csv = String::from(
        "step,time,eps_11,eps_22,eps_33,eps_12,eps_13,eps_23,\
         sig_11,sig_22,sig_33,sig_12,sig_13,sig_23,\
         eps_p_11,eps_p_22,eps_p_33,eps_p_12,eps_p_13,eps_p_23,graph_gap\n",
    );
    for (k, s) in history.iter().enumerate() {
        let mut row = vec![k.to_string(), num(s.t)];
        row.extend(s.eps.components().iter().map(|&v| num(v)));
        row.extend(s.sig.components().iter().map(|&v| num(v)));
        row.extend(s.eps_p.components().iter().map(|&v| num(v)));
        row.push(num(s.graph_gap));
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_file(&out.join("results.csv"), &csv)?;
    println!(
        "point mode: {} steps, final ‖εᵖ‖ = {:.6e}",
        history.len() - 1,
        history.last().map(|s| s.eps_p.norm()).unwrap_or(0.0)
    );
    Ok(())
}

#[derive(Serialize)]
struct TraceLine<'a> {
    step: usize,
    #[serde(flatten)]
    record: &'a IterationRecord,
}

fn run_mesh(out: &Path, cfg: &ScenarioConfig) -> Result<(), u8> {
    let (moduli, params) = material(cfg)?;
    let mesh = cfg.mesh.as_ref().expect("validated mesh config");
    let disc = Discretization::structured(mesh.nx, mesh.ny, mesh.lx, mesh.ly, &mesh.dirichlet)
        .map_err(|e| {
            eprintln!("config error: {e}");
            EXIT_CONFIG
        })?;
    let template = LoadTemplate {
        body: mesh.body_force,
        tractions: mesh.tractions.clone(),
    };
    let initial = StepState::zero(disc.num_dofs(), disc.num_points());
    let solver_cfg = cfg.solver.to_solver_config();
    let result = run_evolution(
        &disc,
        moduli,
        params,
        initial,
        &template,
        &cfg.schedule,
        &solver_cfg,
        cfg.seed,
    );
    let (record, failure) = match result {
        Ok(r) => (r, None),
        Err(f) => {
            eprintln!("solver failure at step {}: {}", f.step, f.error);
            let code = exit_code_for(&f.error.error);
            let f = *f;
            (f.partial, Some(code))
        }
    };
    write_mesh_outputs(out, &record)?;
    match failure {
        Some(code) => Err(code),
        None => {
            let final_margin = record.weak.last().map(|w| w.worst_margin);
            println!(
                "mesh mode: {} steps accepted, final weak margin {:?}",
                record.states.len() - 1,
                final_margin
            );
            Ok(())
        }
    }
}

fn write_mesh_outputs(out: &Path, record: &EvolutionRecord) -> Result<(), u8> {
    let mut csv = String::from(
        "step,time,ux_min,ux_max,uy_min,uy_max,sig_m_min,sig_m_max,\
         sig_dev_norm_max,eps_p_norm_max\n",
    );
    for (k, s) in record.states.iter().enumerate() {
        let (mut ux_min, mut ux_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut uy_min, mut uy_max) = (f64::INFINITY, f64::NEG_INFINITY);
        if s.u.is_empty() {
            ux_min = 0.0;
            ux_max = 0.0;
            uy_min = 0.0;
            uy_max = 0.0;
        }
        for pair in s.u.chunks(2) {
            ux_min = ux_min.min(pair[0]);
            ux_max = ux_max.max(pair[0]);
            uy_min = uy_min.min(pair[1]);
            uy_max = uy_max.max(pair[1]);
        }
        let sig_m_min = s.sig.iter().map(SymTensor::trace).fold(f64::INFINITY, f64::min);
        let sig_m_max = s.sig.iter().map(SymTensor::trace).fold(f64::NEG_INFINITY, f64::max);
        let dev_max = s
            .sig
            .iter()
            .map(|t| t.deviator().norm())
            .fold(0.0f64, f64::max);
        let p_max = s.eps_p.iter().map(SymTensor::norm).fold(0.0f64, f64::max);
        let row = [
            k.to_string(),
            num(s.t),
            num(ux_min),
            num(ux_max),
            num(uy_min),
            num(uy_max),
            num(sig_m_min),
            num(sig_m_max),
            num(dev_max),
            num(p_max),
        ];
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    write_file(&out.join("results.csv"), &csv)?;

    let mut trace_out = Vec::new();
    for (k, trace) in record.traces.iter().enumerate() {
        for r in trace {
            let line = TraceLine { step: k + 1, record: r };
            serde_json::to_writer(&mut trace_out, &line).expect("trace serialization");
            trace_out.push(b'\n');
        }
    }
    fs::File::create(out.join("trace.jsonl"))
        .and_then(|mut f| f.write_all(&trace_out))
        .map_err(|e| {
            eprintln!("internal error: cannot write trace.jsonl: {e}");
            EXIT_INTERNAL
        })?;

    let weak_json = serde_json::to_string_pretty(&record.weak).expect("weak serialization");
    write_file(&out.join("weak.json"), &weak_json)?;
    let pdisc_json = serde_json::to_string_pretty(&record.reports).expect("pdisc serialization");
    write_file(&out.join("pdisc.json"), &pdisc_json)?;
    Ok(())
}

fn exit_code_for(err: &dyn std::fmt::Display) -> u8 {
    // solver-progress failures are "non-convergence"; anything structural is internal
    let text = err.to_string();
    if text.contains("no convergence")
        || text.contains("infinity")
        || text.contains("line search")
        || text.contains("quadrature point")
    {
        EXIT_NONCONVERGENCE
    } else {
        EXIT_INTERNAL
    }
}
