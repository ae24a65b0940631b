//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::time::Instant;

use causal_cert::certify::{
    condition_star, correction_bound, drf_value, link_witness, switch_family_system, threshold_search, witness_on_dpovm, witness_value, Axis,
    BellFunctional, CorrelationTensor, RobustnessLedger, Verdict, FEASIBLE_RESIDUAL_TOL,
};
use causal_cert::dpovm::{effective_dpovm, induce_dpovm, CausalConstraintSystem, Dpovm, PartyEmbedding, SystemKind};
use causal_cert::process::random::{random_instrument, random_separable_process, random_valid_process};
use causal_cert::process::{switch_parties, Instrument, Party, ProcessMatrix};
use causal_cert::protocol_sim::manifest::load_scenario;
use causal_cert::protocol_sim::{
    bell_subtensor, embed_physical, run_ndi_pipeline, simulate_ndi, simulate_nsdi_qi, simulate_sdiqi, JunkSpec, Link, NetworkScenario,
    PipelineConfig, WitnessBundle, PHIL_STAR,
};
use causal_cert::sdp::{extract_witness, solve_feasibility, verify_witness, SolveOptions, SolveStatus};
use causal_cert::tensor_core::{choi_identity_channel, maximally_entangled, pauli_tomographic_set, CMat, LabeledOperator, SystemLabel, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn q(n: &str) -> SystemLabel {
    SystemLabel::new(n, 2)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn scenario_fixture() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/switch_ndi.json")
}

fn switch_threshold() -> Check {
    let iv = threshold_search(switch_family_system, 0.0, 1.0, 1e-3, &SolveOptions::default()).map_err(err)?;
    let target = 2.0 - 2f64.sqrt();
    ensure(!iv.widened && iv.width() <= 1e-3, || format!("width {:.3e}, widened {}", iv.width(), iv.widened))?;
    ensure(iv.contains(target), || format!("[{}, {}] misses 2-sqrt(2)", iv.lo, iv.hi))?;
    ensure(iv.lo >= 0.5858 - 0.002 && iv.hi <= 0.5858 + 0.002, || format!("[{}, {}] leaves 0.5858 +- 0.002", iv.lo, iv.hi))?;
    ensure(iv.lo_certificate_margin > 0.0, || format!("certificate margin {:.3e}", iv.lo_certificate_margin))?;
    ensure(iv.hi_residual <= FEASIBLE_RESIDUAL_TOL && iv.hi_min_eigenvalue >= -1e-9, || {
        format!("upper residual {:.3e}, min eig {:.3e}", iv.hi_residual, iv.hi_min_eigenvalue)
    })?;
    Ok(format!(
        "[{:.7}, {:.7}] width {:.2e}, margin {:.2e}, residual {:.2e}",
        iv.lo,
        iv.hi,
        iv.width(),
        iv.lo_certificate_margin,
        iv.hi_residual
    ))
}

fn chsh_bounds() -> Check {
    let f = BellFunctional::extended_chsh();
    let local = f.best_deterministic_value();
    ensure(local == 6.0, || format!("local bound {}", local))?;
    let quantum = f.value(&causal_cert::certify::reference_bell_correlations().map_err(err)?).map_err(err)?;
    ensure((quantum - 6.0 * 2f64.sqrt()).abs() <= 1e-9, || format!("reference value {}", quantum))?;
    Ok(format!("local {} over 512 strategies, reference {:.12}", local, quantum))
}

fn pauli_link(preparer: &str, party: &str) -> Result<Link, String> {
    let (pl, ql) = (format!("{}'", preparer), format!("{}'", party));
    Ok(Link {
        preparer: preparer.into(),
        party: party.into(),
        measurement: pauli_tomographic_set(1, &pl).map_err(err)?,
        shared: maximally_entangled(q(&pl), q(&ql)).map_err(err)?,
        bell_settings: vec![],
        party_bell_settings: vec![],
    })
}

fn random_instruments(parties: &[Party], quantum: impl Fn(&str) -> Vec<SystemLabel>, shape: impl Fn(&str) -> (usize, usize), rng: &mut ChaCha8Rng) -> Result<BTreeMap<String, Instrument>, String> {
    let mut out = BTreeMap::new();
    for p in parties {
        let (x, a) = shape(&p.name);
        let inst = random_instrument(&p.name, quantum(&p.name), p.input.clone(), p.output.clone(), x, a, rng).map_err(err)?;
        out.insert(p.name.clone(), inst);
    }
    Ok(out)
}

fn heralded_factorization() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let parties = vec![Party::qubits("A"), Party::qubits("B")];
        let process = random_valid_process(&parties, &mut rng).map_err(err)?;
        let instruments = random_instruments(&parties, |n| vec![q(&format!("{}'", n))], |_| (1, 2), &mut rng)?;
        let scn = NetworkScenario {
            process,
            instruments,
            links: vec![pauli_link("C", "A")?, pauli_link("D", "B")?],
            star: BTreeMap::new(),
        };
        let p = simulate_nsdi_qi(&scn).map_err(err)?;
        let sdi = simulate_sdiqi(&scn.process, &scn.instruments, &scn.state_sets().map_err(err)?).map_err(err)?;
        let (pc, pd) = (p.outcome_probability("C", 0).map_err(err)?, p.outcome_probability("D", 0).map_err(err)?);
        // With the other preparer's setting fixed, index into the heralding marginals.
        for z in 0..3 {
            for w in 0..3 {
                let (pz, pw) = (pc[z * 3 + w], pd[z * 3 + w]);
                for a in 0..2 {
                    for b in 0..2 {
                        let joint = p.get(&[z, w, 0, 0], &[0, 0, a, b]);
                        let want = pz * pw * sdi.get(&[z, w, 0, 0], &[a, b]);
                        worst = worst.max((joint - want).abs());
                    }
                }
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {:.3e}", worst))?;
    Ok(format!("10 processes, max deviation {:.2e}", worst))
}

fn solve_tight() -> SolveOptions {
    SolveOptions {
        tol: 1e-9,
        max_iter: 200_000,
        ..SolveOptions::default()
    }
}

fn check_feasible(sys: &CausalConstraintSystem) -> Result<f64, String> {
    let r = solve_feasibility(&sys.to_program().map_err(err)?, &solve_tight()).map_err(err)?;
    ensure(r.status == SolveStatus::Feasible, || format!("{:?} status {:?}", sys.kind, r.status))?;
    let c = sys.check(r.solution.as_ref().ok_or("no solution")?).map_err(err)?;
    ensure(c.residual <= 1e-7 && c.min_eigenvalue >= -1e-9, || format!("{:?} residual {:.3e} min eig {:.3e}", sys.kind, c.residual, c.min_eigenvalue))?;
    Ok(c.residual)
}

/// Measurement on `(X'I, X_I)` with the identity channel `X'O -> X_O`.
fn mdci_instrument(p: &Party, rng: &mut ChaCha8Rng) -> Result<Instrument, String> {
    let (qi, qo) = (q(&format!("{}'I", p.name)), q(&format!("{}'O", p.name)));
    let (i, o) = (p.input.clone().ok_or("no input")?, p.output.clone().ok_or("no output")?);
    let m = random_instrument(&p.name, vec![qi.clone()], Some(i), None, 1, 2, rng).map_err(err)?;
    let chan = choi_identity_channel(qo.clone(), o.clone()).map_err(err)?;
    let row = m.elements()[0].iter().map(|e| e.tensor(&chan)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    Instrument::new(&p.name, vec![qi, qo], p.input.clone(), p.output.clone(), vec![row]).map_err(err)
}

fn separability_preservation() -> Check {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut worst: f64 = 0.0;
    let mut record = |kind: SystemKind, r: f64| {
        *counts.entry(format!("{:?}", kind)).or_default() += 1;
        worst = worst.max(r);
    };
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let parties = vec![Party::qubits("A"), Party::qubits("B")];
        let w = random_separable_process(&parties, &[vec!["A", "B"], vec!["B", "A"]], 2, &mut rng).map_err(err)?;
        let inst = random_instruments(&parties, |n| vec![q(&format!("{}'", n))], |_| (1, 2), &mut rng)?;
        let e = induce_dpovm(&w, &inst).map_err(err)?;
        record(SystemKind::Bipartite, check_feasible(&CausalConstraintSystem::build(SystemKind::Bipartite, &e).map_err(err)?)?);
        let mdci: BTreeMap<String, Instrument> = parties
            .iter()
            .map(|p| Ok((p.name.clone(), mdci_instrument(p, &mut rng)?)))
            .collect::<Result<_, String>>()?;
        let e = induce_dpovm(&w, &mdci).map_err(err)?;
        record(SystemKind::Nmdci, check_feasible(&CausalConstraintSystem::build(SystemKind::Nmdci, &e).map_err(err)?)?);
    }
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let parties = switch_parties();
        let w = random_separable_process(&parties, &[vec!["P", "A", "B", "F"], vec!["P", "B", "A", "F"]], 2, &mut rng).map_err(err)?;
        let all = random_instruments(&parties, |n| vec![q(&format!("{}'", n))], |_| (1, 2), &mut rng)?;
        let e = induce_dpovm(&w, &all).map_err(err)?;
        record(SystemKind::P2fDefinition1, check_feasible(&CausalConstraintSystem::build(SystemKind::P2fDefinition1, &e).map_err(err)?)?);
        let phil_only = random_instruments(
            &parties,
            |n| if n == "P" { vec![q("P'")] } else { vec![] },
            |n| if n == "P" { (1, 2) } else { (2, 2) },
            &mut rng,
        )?;
        let e = induce_dpovm(&w, &phil_only).map_err(err)?;
        record(SystemKind::P2fDefinition2, check_feasible(&CausalConstraintSystem::build(SystemKind::P2fDefinition2, &e).map_err(err)?)?);
    }
    Ok(format!("20 processes, feasible {:?}, max residual {:.2e}", counts, worst))
}

fn random_operator(labels: Vec<SystemLabel>, rng: &mut ChaCha8Rng) -> Result<LabeledOperator, String> {
    let d: usize = labels.iter().map(|l| l.dim).product();
    let m = CMat::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    LabeledOperator::new(labels, m).map_err(err)
}

/// `Tr_Y[(A^{T_Y} ⊗ 1) (1 ⊗ B)]` by explicit matrices.
fn link_by_definition(a: &LabeledOperator, b: &LabeledOperator) -> Result<LabeledOperator, String> {
    let shared: Vec<&str> = a.names().into_iter().filter(|n| b.has(n)).collect();
    let only_a: Vec<SystemLabel> = a.systems().iter().filter(|l| !b.has(&l.name)).cloned().collect();
    let only_b: Vec<SystemLabel> = b.systems().iter().filter(|l| !a.has(&l.name)).cloned().collect();
    let ae = a.partial_transpose(&shared).map_err(err)?.extend_identity(&only_b).map_err(err)?;
    let be = b.extend_identity(&only_a).map_err(err)?.permuted(&ae.names()).map_err(err)?;
    let prod = LabeledOperator::new(ae.systems().to_vec(), ae.matrix() * be.matrix()).map_err(err)?;
    prod.partial_trace(&shared).map_err(err)
}

fn aligned_diff(x: &LabeledOperator, y: &LabeledOperator) -> Result<f64, String> {
    x.max_abs_diff(&y.permuted(&x.names()).map_err(err)?).map_err(err)
}

fn link_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4000);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dims: Vec<usize> = (0..4).map(|_| rng.gen_range(1..=3)).collect();
        let l: Vec<SystemLabel> = ["X", "Y", "Z", "V"].iter().zip(&dims).map(|(n, &d)| SystemLabel::new(*n, d)).collect();
        let a = random_operator(vec![l[0].clone(), l[1].clone()], &mut rng)?;
        let b = random_operator(vec![l[2].clone(), l[1].clone(), l[3].clone()], &mut rng)?;
        let c = random_operator(vec![l[3].clone(), l[0].clone()], &mut rng)?;
        let ab = a.link(&b).map_err(err)?;
        worst = worst.max(aligned_diff(&ab, &b.link(&a).map_err(err)?)?);
        worst = worst.max(aligned_diff(&ab, &link_by_definition(&a, &b)?)?);
        worst = worst.max(aligned_diff(&ab.link(&c).map_err(err)?, &a.link(&b.link(&c).map_err(err)?).map_err(err)?)?);
        worst = worst.max(aligned_diff(&b.link(&c).map_err(err)?, &link_by_definition(&b, &c)?)?);
    }
    ensure(worst <= 1e-12, || format!("max deviation {:.3e}", worst))?;
    Ok(format!("100 triples, max deviation {:.2e}", worst))
}

fn effective_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    let parties = vec![Party::qubits("A"), Party::qubits("B")];
    let w = random_valid_process(&parties, &mut rng).map_err(err)?;
    let inst = random_instruments(&parties, |n| vec![q(&format!("{}~", n))], |_| (2, 2), &mut rng)?;
    let physical = induce_dpovm(&w, &inst).map_err(err)?;
    let emb = ["A", "B"]
        .iter()
        .map(|n| PartyEmbedding::identity(n, q(&format!("{}~", n)), q(&format!("{}'", n))))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let eff = effective_dpovm(&physical, &emb).map_err(err)?;
    let mut worst: f64 = 0.0;
    for (e, p) in eff.elements().iter().zip(physical.elements()) {
        let renamed = p.relabel("A~", "A'").and_then(|x| x.relabel("B~", "B'")).map_err(err)?;
        worst = worst.max(aligned_diff(e, &renamed)?);
    }
    ensure(worst <= 1e-12, || format!("identity embedding deviation {:.3e}", worst))?;

    let scn = load_scenario(scenario_fixture()).map_err(err)?;
    let reference = simulate_ndi(&scn).map_err(err)?;
    let spec = JunkSpec {
        junk_dim: 2,
        flag_weights: [0.5, 0.5],
        perturbation: 0.0,
    };
    let real = embed_physical(&scn, &[spec]).map_err(err)?;
    let observed = simulate_ndi(&real.physical).map_err(err)?;
    let flag = max_diff(reference.values(), observed.values());
    ensure(flag <= 1e-12, || format!("flag-split tensor deviation {:.3e}", flag))?;
    Ok(format!("identity {:.2e}, flag split {:.2e} over {} entries", worst, flag, observed.values().len()))
}

fn heralding_p0(p: &CorrelationTensor) -> Result<Vec<Vec<f64>>, String> {
    let fixed = p
        .fix_input("P", PHIL_STAR)
        .and_then(|t| t.fix_input("A", 0))
        .and_then(|t| t.fix_input("B", 0))
        .and_then(|t| t.fix_input("F", 0))
        .map_err(err)?;
    Ok(vec![fixed.outcome_probability("E", 0).map_err(err)?])
}

fn robustness_ledger() -> Check {
    let scn = load_scenario(scenario_fixture()).map_err(err)?;
    let wb = WitnessBundle::from_reference(&scn, SystemKind::P2fDefinition2, &SolveOptions::default()).map_err(err)?;
    let mut parts = Vec::new();
    for theta in [0.0, 1e-4, 1e-3, 1e-2] {
        let spec = JunkSpec {
            junk_dim: 2,
            flag_weights: [0.7, 0.3],
            perturbation: theta,
        };
        let real = embed_physical(&scn, &[spec]).map_err(err)?;
        ensure(real.trace_distance[0] <= theta + 1e-15, || format!("trace distance {} above theta {}", real.trace_distance[0], theta))?;
        let p = simulate_ndi(&real.physical).map_err(err)?;
        let j = witness_value(&wb.coefficients, &condition_star(&p).map_err(err)?).map_err(err)?;
        let ledger = RobustnessLedger::from_theta(&wb.coefficients, theta, 0.0, 1.0, heralding_p0(&p)?).map_err(err)?;
        let corr = ledger.correction_max;
        let dj = (j - wb.reference_value).abs();
        if theta == 0.0 {
            ensure(corr == 0.0, || format!("correction at theta 0 is {}", corr))?;
            ensure(dj <= 1e-12, || format!("|dJ| at theta 0 is {:.3e}", dj))?;
        } else {
            ensure(dj <= corr, || format!("theta {}: |dJ| {:.3e} > correction {:.3e}", theta, dj, corr))?;
            let direct = correction_bound(&wb.coefficients, theta, &heralding_p0(&p)?).map_err(err)?;
            ensure(direct == corr, || "ledger and direct bound disagree".into())?;
        }
        parts.push(format!("{:.0e}: {:.1e}<={:.1e}", theta, dj, corr));
    }
    Ok(parts.join(", "))
}

fn ndi_end_to_end() -> Check {
    let scn = load_scenario(scenario_fixture()).map_err(err)?;
    let wb = WitnessBundle::from_reference(&scn, SystemKind::P2fDefinition2, &SolveOptions::default()).map_err(err)?;
    let rep = run_ndi_pipeline(&scn, &wb, &PipelineConfig::default()).map_err(err)?;
    let p = simulate_ndi(&scn).map_err(err)?;
    for l in &scn.links {
        let v = BellFunctional::extended_chsh().value(&bell_subtensor(&p, l).map_err(err)?).map_err(err)?;
        ensure((v - 6.0 * 2f64.sqrt()).abs() <= 1e-9, || format!("{}-{} Bell value {}", l.preparer, l.party, v))?;
    }
    for b in &rep.bell {
        ensure((b.value - 6.0 * 2f64.sqrt()).abs() <= 1e-9, || format!("{}-{} Bell value {}", b.preparer, b.party, b.value))?;
    }
    ensure(rep.j_exp < 0.0 && rep.verdict == Verdict::Certified, || format!("J {} verdict {:?}", rep.j_exp, rep.verdict))?;
    let bells: Vec<String> = rep.bell.iter().map(|b| format!("{}-{} {:.9}", b.preparer, b.party, b.value)).collect();
    Ok(format!("Bell {}, J {:.6}, correction {}, {:?}", bells.join(" "), rep.j_exp, rep.ledger.correction_max, rep.verdict))
}

fn random_switch_shaped(rng: &mut ChaCha8Rng) -> Result<Dpovm, String> {
    let parties = switch_parties();
    let w: ProcessMatrix = random_separable_process(&parties, &[vec!["P", "A", "B", "F"], vec!["P", "B", "A", "F"]], 2, rng).map_err(err)?;
    let inst = random_instruments(
        &parties,
        |n| if n == "P" { vec![q("P'")] } else { vec![] },
        |n| match n {
            "P" => (1, 1),
            "F" => (1, 2),
            _ => (2, 2),
        },
        rng,
    )?;
    induce_dpovm(&w, &inst).map_err(err)
}

fn witness_soundness() -> Check {
    let opts = SolveOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9000);
    let samples = (0..50).map(|_| random_switch_shaped(&mut rng)).collect::<Result<Vec<_>, _>>()?;
    let mut parts = Vec::new();
    for r in [0.0, 0.3] {
        let sys = switch_family_system(r).map_err(err)?;
        let program = sys.to_program().map_err(err)?;
        let f = extract_witness(&program, &solve_feasibility(&program, &opts).map_err(err)?, &opts).map_err(err)?;
        let check = verify_witness(&f, &program, &opts).map_err(err)?;
        ensure(check.passed, || format!("r={}: verification failed {:?}", r, check))?;
        let ops = link_witness(&sys, &f).map_err(err)?;
        let mut least = f64::INFINITY;
        for e in &samples {
            least = least.min(witness_on_dpovm(&ops, e).map_err(err)?);
        }
        ensure(least >= 0.0, || format!("r={}: value {:.3e} on a separable D-POVM", r, least))?;
        parts.push(format!("r={}: pairing {:.3e}, min separable {:.3e}", r, check.pairing, least));
    }
    Ok(parts.join("; "))
}

fn drf_evaluator() -> Check {
    let inputs: Vec<Axis> = ["t", "z", "w", "v"].iter().map(|n| Axis::new(n, 2)).collect();
    let outcomes: Vec<Axis> = ["e", "a", "b", "f"].iter().map(|n| Axis::new(n, 2)).collect();
    let uniform = drf_value(&CorrelationTensor::uniform(inputs.clone(), outcomes.clone()).map_err(err)?).map_err(err)?;
    ensure(uniform.value == 1.0, || format!("uniform value {}", uniform.value))?;
    ensure(uniform.classical_bound == 7.0 / 4.0, || format!("bound {}", uniform.classical_bound))?;
    // e = 0, a = 0, b = z, f = 0 scores 1 + 0 + 3/4.
    let det = CorrelationTensor::from_fn(inputs, outcomes, |x, y| if y == [0, 0, x[1], 0] { 1.0 } else { 0.0 }).map_err(err)?;
    let rep = drf_value(&det).map_err(err)?;
    ensure(rep.terms == [1.0, 0.0, 0.75] && rep.value == 1.75, || format!("deterministic terms {:?} value {}", rep.terms, rep.value))?;
    Ok(format!("uniform {}, bound {}, deterministic {}", uniform.value, uniform.classical_bound, rep.value))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("switch noise threshold", switch_threshold),
        ("extended CHSH bounds", chsh_bounds),
        ("heralded factorization", heralded_factorization),
        ("separability preservation", separability_preservation),
        ("link product algebra", link_algebra),
        ("effective D-POVM identity", effective_identity),
        ("robustness ledger", robustness_ledger),
        ("end-to-end NDI certification", ndi_end_to_end),
        ("witness soundness", witness_soundness),
        ("DRF evaluator", drf_evaluator),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {}: {} ({:.1}s)", i + 1, name, detail, secs),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {}: {} ({:.1}s)", i + 1, name, why, secs);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
