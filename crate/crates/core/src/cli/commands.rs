use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{Cli, Command, Definition, Outcome, RunConfig, ScenarioSource, SimulateMode, EXIT_OK, EXIT_UNDECIDED};
use crate::certify::{
    condition_star, drf_value, extended_chsh_value, link_witness, switch_family_system, threshold_search, Verdict,
};
use crate::dpovm::{induce_dpovm, load_dpovm, save_dpovm, CausalConstraintSystem, Dpovm, SystemKind};
use crate::error::{Error, Result};
use crate::process::manifest::{load_instruments, load_process};
use crate::process::{build_quantum_switch, depolarize, switch_instruments, validate_process_matrix};
use crate::protocol_sim::manifest::load_scenario;
use crate::protocol_sim::{
    bell_subtensor, drf_slice, noisy_realization, run_ndi_pipeline, simulate_ndi, simulate_nsdi_qi, simulate_sdiqi, switch_ndi_scenario,
    JunkSpec, NetworkScenario, NoiseConfig, PipelineConfig, WitnessBundle,
};
use crate::sdp::sdpa::export_interchange;
use crate::sdp::{check_certificate, extract_witness, solve_feasibility, verify_witness, SolveStatus};
use crate::tensor_core::text::{write_records, NamedOperator};

pub(super) fn dispatch(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    let (cfg, out) = match &cli.command {
        Command::Validate { process } => {
            let cfg = RunConfig::resolve(g, None, "validate", vec![process.clone()])?;
            let o = validate(process)?;
            (cfg, o)
        }
        Command::Induce { process, instruments, switch } => {
            let inputs = process.iter().chain(instruments).cloned().collect();
            let cfg = RunConfig::resolve(g, None, "induce", inputs)?;
            let o = induce(&cfg, process.as_deref(), instruments.as_deref(), *switch)?;
            (cfg, o)
        }
        Command::CheckSep { source, definition } => {
            let cfg = RunConfig::resolve(g, None, "check-sep", source.dpovm.iter().cloned().collect())?;
            let o = check_sep(&cfg, &load_source(source.dpovm.as_deref(), source.switch)?, *definition)?;
            (cfg, o)
        }
        Command::Witness {
            dpovm,
            scenario,
            switch,
            definition,
        } => {
            let inputs = dpovm.iter().chain(scenario).cloned().collect();
            let cfg = RunConfig::resolve(g, None, "witness", inputs)?;
            let o = match (dpovm, scenario, switch) {
                (Some(p), _, _) => witness_functional(&cfg, &load_dpovm(p)?, *definition)?,
                (None, Some(p), _) => witness_bundle(&cfg, &load_scenario(p)?, *definition)?,
                (None, None, Some(r)) => witness_bundle(&cfg, &switch_ndi_scenario(*r, false)?, *definition)?,
                _ => return Err(Error::InvalidArgument("witness needs --dpovm, --scenario or --switch".into())),
            };
            (cfg, o)
        }
        Command::Simulate { source, mode, noise, drf } => {
            let cfg = RunConfig::resolve(g, Some(noise), "simulate", source.scenario.iter().cloned().collect())?;
            let o = simulate(&cfg, &scenario(source, *drf)?, *mode, *drf)?;
            (cfg, o)
        }
        Command::NdiPipeline {
            source,
            witness,
            definition,
            noise,
        } => {
            let inputs = source.scenario.iter().chain(witness).cloned().collect();
            let cfg = RunConfig::resolve(g, Some(noise), "ndi-pipeline", inputs)?;
            let o = ndi_pipeline(&cfg, &scenario(source, false)?, witness.as_deref(), *definition)?;
            (cfg, o)
        }
        Command::SwitchThreshold { r_lo, r_hi, r_tol } => {
            let cfg = RunConfig::resolve(g, None, "switch-threshold", vec![])?;
            let o = switch_threshold(&cfg, *r_lo, *r_hi, *r_tol)?;
            (cfg, o)
        }
        Command::ExportSdpa { source, definition, output } => {
            let cfg = RunConfig::resolve(g, None, "export-sdpa", source.dpovm.iter().cloned().collect())?;
            let o = export_sdpa(&cfg, &load_source(source.dpovm.as_deref(), source.switch)?, *definition, output.as_deref())?;
            (cfg, o)
        }
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    let side = cfg.out_dir.join(format!("{}.json", cfg.command));
    let doc = json!({ "config": cfg, "report": out.json, "exit_code": out.code });
    std::fs::write(&side, serde_json::to_string_pretty(&doc)?)?;
    Ok(out)
}

fn switch_dpovm(r: f64) -> Result<Dpovm> {
    induce_dpovm(&depolarize(&build_quantum_switch()?, r)?, &switch_instruments()?)
}

fn load_source(path: Option<&Path>, switch: Option<f64>) -> Result<Dpovm> {
    match (path, switch) {
        (Some(p), _) => load_dpovm(p),
        (None, Some(r)) => switch_dpovm(r),
        _ => Err(Error::InvalidArgument("need --dpovm or --switch".into())),
    }
}

fn scenario(src: &ScenarioSource, drf_fiona: bool) -> Result<NetworkScenario> {
    match (&src.scenario, src.switch) {
        (Some(p), _) => load_scenario(p),
        (None, Some(r)) => switch_ndi_scenario(r, drf_fiona),
        _ => Err(Error::InvalidArgument("need --scenario or --switch".into())),
    }
}

fn noise_config(cfg: &RunConfig, links: usize) -> NoiseConfig {
    let spec = JunkSpec {
        junk_dim: cfg.junk_dim,
        flag_weights: [1.0 - cfg.flag_weight, cfg.flag_weight],
        perturbation: cfg.perturbation,
    };
    NoiseConfig {
        visibility: cfg.visibility,
        depolarize: cfg.depolarize,
        junk: if spec == JunkSpec::default() { vec![] } else { vec![spec; links] },
    }
}

fn validate(path: &Path) -> Result<Outcome> {
    let w = load_process(path)?;
    let rep = validate_process_matrix(&w)?;
    let mut t = String::new();
    let _ = writeln!(t, "process      {}", path.display());
    let _ = writeln!(t, "valid        {}", rep.valid);
    let _ = writeln!(t, "trace        {:.12} (expected {})", rep.trace, rep.expected_trace);
    let _ = writeln!(t, "min eig      {:.3e}", rep.min_eigenvalue);
    let _ = writeln!(t, "hermitian    {:.3e}", rep.hermitian_deviation);
    let _ = writeln!(t, "subspace     {:.3e}", rep.subspace_residual);
    Ok(Outcome {
        code: if rep.valid { EXIT_OK } else { EXIT_UNDECIDED },
        json: serde_json::to_value(&rep)?,
        text: t,
    })
}

fn induce(cfg: &RunConfig, process: Option<&Path>, instruments: Option<&Path>, switch: Option<f64>) -> Result<Outcome> {
    let e = match (process, instruments, switch) {
        (Some(p), Some(i), _) => induce_dpovm(&load_process(p)?, &load_instruments(i)?)?,
        (Some(_), None, _) => return Err(Error::InvalidArgument("--process needs --instruments".into())),
        (None, _, Some(r)) => switch_dpovm(r)?,
        _ => return Err(Error::InvalidArgument("need --process and --instruments, or --switch".into())),
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = save_dpovm(&cfg.out_dir, "dpovm", &e)?;
    let rep = e.report()?;
    let mut t = String::new();
    let _ = writeln!(t, "elements     {} ({} inputs x {} outcomes)", e.elements().len(), e.input_count(), e.outcome_count());
    let _ = writeln!(t, "min eig      {:.3e}", rep.min_eigenvalue);
    let _ = writeln!(t, "normalization {:.3e}", rep.normalization_error);
    let _ = writeln!(t, "written      {}", path.display());
    Ok(Outcome {
        code: EXIT_OK,
        json: json!({ "report": rep, "dpovm": path, "parties": e.parties() }),
        text: t,
    })
}

fn check_sep(cfg: &RunConfig, e: &Dpovm, def: Definition) -> Result<Outcome> {
    let sys = CausalConstraintSystem::build(def.into(), e)?;
    let p = sys.to_program()?;
    let opts = cfg.solve_options();
    let rep = solve_feasibility(&p, &opts)?;
    let mut t = String::new();
    let _ = writeln!(t, "definition   {:?}", def);
    let _ = writeln!(t, "program      {} variables, {} rows", p.num_vars(), p.num_rows());
    let _ = writeln!(t, "status       {:?}", rep.status);
    let _ = writeln!(t, "iterations   {}", rep.iterations);
    let _ = writeln!(t, "residual     {:.3e}", rep.primal_residual);
    let mut doc = json!({ "status": rep.status, "iterations": rep.iterations, "primal_residual": rep.primal_residual });
    let code = match rep.status {
        SolveStatus::Feasible => {
            let chk = sys.check(rep.solution.as_ref().unwrap())?;
            let _ = writeln!(t, "check        residual {:.3e}, min eig {:.3e}", chk.residual, chk.min_eigenvalue);
            doc["check"] = serde_json::to_value(&chk)?;
            EXIT_OK
        }
        SolveStatus::InfeasibleWithCertificate => {
            let margin = rep.certificate.as_ref().and_then(|c| check_certificate(&p, c));
            match margin {
                Some(m) => {
                    let _ = writeln!(t, "margin       {:.6e}", m);
                }
                None => {
                    let _ = writeln!(t, "margin       certificate rejected on recheck");
                }
            }
            doc["certificate_margin"] = json!(margin);
            let f = extract_witness(&p, &rep, &opts)?;
            let chk = verify_witness(&f, &p, &opts)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("witness.json");
            std::fs::write(&path, serde_json::to_string_pretty(&f)?)?;
            let _ = writeln!(t, "witness      {} (pairing {:.6}, verified {})", path.display(), f.pairing, chk.passed);
            doc["witness"] = json!({ "path": path, "pairing": f.pairing, "verified": chk.passed });
            EXIT_OK
        }
        SolveStatus::Undecided => {
            let _ = writeln!(t, "undecided: raise --max-iter (now {}) or loosen --tol (now {:.1e})", cfg.max_iter, cfg.tol);
            EXIT_UNDECIDED
        }
    };
    Ok(Outcome { code, json: doc, text: t })
}

fn witness_functional(cfg: &RunConfig, e: &Dpovm, def: Definition) -> Result<Outcome> {
    let sys = CausalConstraintSystem::build(def.into(), e)?;
    let p = sys.to_program()?;
    let opts = cfg.solve_options();
    let rep = solve_feasibility(&p, &opts)?;
    if rep.status != SolveStatus::InfeasibleWithCertificate {
        return Ok(Outcome {
            code: EXIT_UNDECIDED,
            json: json!({ "status": rep.status }),
            text: format!("no witness: solver status {:?}\n", rep.status),
        });
    }
    let f = extract_witness(&p, &rep, &opts)?;
    let chk = verify_witness(&f, &p, &opts)?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("witness.json");
    std::fs::write(&path, serde_json::to_string_pretty(&f)?)?;
    let ops = link_witness(&sys, &f)?;
    let recs: Vec<NamedOperator> = ops
        .into_iter()
        .enumerate()
        .map(|(i, operator)| NamedOperator {
            name: Some(format!("S[{}]", i)),
            operator,
        })
        .collect();
    let ops_path = cfg.out_dir.join("witness_operators.txt");
    write_records(&ops_path, &recs)?;
    let mut t = String::new();
    let _ = writeln!(t, "pairing      {:.9}", f.pairing);
    let _ = writeln!(t, "lower bound  {:.3e}", f.lower_bound);
    let _ = writeln!(t, "verified     {}", chk.passed);
    let _ = writeln!(t, "written      {}, {}", path.display(), ops_path.display());
    Ok(Outcome {
        code: if chk.passed { EXIT_OK } else { EXIT_UNDECIDED },
        json: json!({ "pairing": f.pairing, "lower_bound": f.lower_bound, "check": chk, "witness": path, "operators": ops_path }),
        text: t,
    })
}

fn witness_bundle(cfg: &RunConfig, scn: &NetworkScenario, def: Definition) -> Result<Outcome> {
    let wb = WitnessBundle::from_reference(scn, def.into(), &cfg.solve_options())?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("witness_bundle.json");
    wb.save(&path)?;
    let text = format!("reference J  {:.9}\nwritten      {}\n", wb.reference_value, path.display());
    Ok(Outcome {
        code: EXIT_OK,
        json: json!({ "reference_value": wb.reference_value, "bundle": path }),
        text,
    })
}

fn simulate(cfg: &RunConfig, reference: &NetworkScenario, mode: SimulateMode, drf: bool) -> Result<Outcome> {
    let (scn, dist) = noisy_realization(reference, &noise_config(cfg, reference.links.len()))?;
    let p = match mode {
        SimulateMode::Ndi => simulate_ndi(&scn)?,
        SimulateMode::Nsdi => simulate_nsdi_qi(&scn)?,
        SimulateMode::Sdiqi => simulate_sdiqi(
            &depolarize(&reference.process, cfg.depolarize)?,
            &reference.star_instruments()?,
            &reference.state_sets()?,
        )?,
    };
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("correlations.json");
    p.save(&path)?;
    let mut t = String::new();
    let _ = writeln!(t, "tensor       {} inputs x {} outcomes -> {}", p.input_count(), p.outcome_count(), path.display());
    let mut doc = json!({ "tensor": path, "trace_distance": dist });
    if mode != SimulateMode::Sdiqi {
        let mut bells = Vec::new();
        for l in scn.links.iter().filter(|l| !l.bell_settings.is_empty()) {
            let v = extended_chsh_value(&bell_subtensor(&p, l)?)?;
            let _ = writeln!(t, "bell {}-{}     {:.9} (quantum max {:.9})", l.preparer, l.party, v, 6.0 * std::f64::consts::SQRT_2);
            bells.push(json!({ "preparer": l.preparer, "party": l.party, "value": v }));
        }
        doc["bell"] = json!(bells);
    }
    if mode == SimulateMode::Ndi {
        let star = condition_star(&p)?;
        let sp = cfg.out_dir.join("correlations_star.json");
        star.save(&sp)?;
        let _ = writeln!(t, "P-star       {} inputs x {} outcomes -> {}", star.input_count(), star.outcome_count(), sp.display());
        doc["star_tensor"] = json!(sp);
    }
    if drf {
        if mode != SimulateMode::Ndi {
            return Err(Error::InvalidArgument("--drf needs --mode ndi".into()));
        }
        let renamed = p.with_axis_names(&["t", "u", "z", "w", "v"], &["e", "p", "a", "b", "f"])?;
        let rep = drf_value(&drf_slice(&renamed)?)?;
        let _ = writeln!(
            t,
            "DRF          {:.9} (terms {:.6} {:.6} {:.6}; classical bound {}; {})",
            rep.value, rep.terms[0], rep.terms[1], rep.terms[2], rep.classical_bound, rep.input_convention
        );
        doc["drf"] = serde_json::to_value(&rep)?;
    }
    Ok(Outcome { code: EXIT_OK, json: doc, text: t })
}

fn ndi_pipeline(cfg: &RunConfig, scn: &NetworkScenario, witness: Option<&Path>, def: Definition) -> Result<Outcome> {
    scn.check_ndi()?;
    let pc = PipelineConfig {
        noise: noise_config(cfg, scn.links.len()),
        kappa: cfg.kappa,
        system: SystemKind::from(def),
        solve: cfg.solve_options(),
    };
    let wb = match witness {
        Some(p) => WitnessBundle::load(p)?,
        None => WitnessBundle::from_reference(scn, pc.system, &pc.solve)?,
    };
    let rep = run_ndi_pipeline(scn, &wb, &pc)?;
    let mut t = String::new();
    for b in &rep.bell {
        let _ = writeln!(t, "bell {}-{}     {:.9}  eps {:.3e}  theta {:.3e}", b.preparer, b.party, b.value, b.epsilon, b.theta);
    }
    let _ = writeln!(t, "J reference  {:.9}", rep.j_reference);
    let _ = writeln!(t, "J observed   {:.9}", rep.j_exp);
    let _ = writeln!(t, "correction   {:.9}", rep.ledger.correction_max);
    let _ = writeln!(t, "margin       {:.9}", -rep.j_exp - rep.ledger.correction_max);
    let _ = writeln!(t, "verdict      {:?}", rep.verdict);
    Ok(Outcome {
        code: if rep.verdict == Verdict::Certified { EXIT_OK } else { EXIT_UNDECIDED },
        json: serde_json::to_value(&rep)?,
        text: t,
    })
}

fn switch_threshold(cfg: &RunConfig, lo: f64, hi: f64, tol: f64) -> Result<Outcome> {
    let iv = threshold_search(switch_family_system, lo, hi, tol, &cfg.solve_options())?;
    let target = 2.0 - std::f64::consts::SQRT_2;
    let mut t = String::new();
    let _ = writeln!(t, "interval     [{:.7}, {:.7}]  width {:.2e}", iv.lo, iv.hi, iv.width());
    let _ = writeln!(t, "2 - sqrt(2)  {:.7}  {}", target, if iv.contains(target) { "inside" } else { "outside" });
    let _ = writeln!(t, "lower end    certificate margin {:.3e}", iv.lo_certificate_margin);
    let _ = writeln!(t, "upper end    residual {:.3e}, min eig {:.3e}", iv.hi_residual, iv.hi_min_eigenvalue);
    let _ = writeln!(t, "probes       {}", iv.probes.len());
    if iv.widened {
        let _ = writeln!(t, "undecided probes stopped the bisection before the requested width");
    }
    Ok(Outcome {
        code: if iv.widened { EXIT_UNDECIDED } else { EXIT_OK },
        json: json!({ "interval": iv, "target": target, "contains_target": iv.contains(target) }),
        text: t,
    })
}

fn export_sdpa(cfg: &RunConfig, e: &Dpovm, def: Definition, output: Option<&Path>) -> Result<Outcome> {
    let p = CausalConstraintSystem::build(def.into(), e)?.to_program()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path: PathBuf = output.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.join("program.dat-s"));
    export_interchange(&p, &path)?;
    Ok(Outcome {
        code: EXIT_OK,
        json: json!({ "path": path, "rows": p.num_rows(), "blocks": p.blocks().len() }),
        text: format!("written      {} ({} rows, {} blocks)\n", path.display(), p.num_rows(), p.blocks().len()),
    })
}
