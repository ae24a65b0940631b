//! The bundled fixtures match what the library builds. Set
//! `CAUSAL_CERT_REGEN_FIXTURES=1` to rewrite them.

use std::path::PathBuf;

use causal_cert::dpovm::{induce_dpovm, load_dpovm, save_dpovm, SystemKind};
use causal_cert::process::manifest::{load_instruments, load_process, save_instruments, save_process};
use causal_cert::process::{build_quantum_switch, switch_instruments, validate_process_matrix};
use causal_cert::protocol_sim::manifest::{load_scenario, save_scenario};
use causal_cert::protocol_sim::{simulate_ndi, switch_ndi_scenario, WitnessBundle};
use causal_cert::sdp::SolveOptions;
use causal_cert::tensor_core::pauli_tomographic_set;
use causal_cert::tensor_core::text::{read_records, write_records, NamedOperator};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn regenerate() {
    let d = dir();
    std::fs::create_dir_all(&d).unwrap();
    let w = build_quantum_switch().unwrap();
    save_process(&d, "switch", &w).unwrap();
    let white = w.with_op(w.white_noise().unwrap()).unwrap();
    save_process(&d, "white_noise", &white).unwrap();
    save_instruments(&d, "switch_instruments", &switch_instruments().unwrap()).unwrap();
    save_dpovm(&d, "switch_dpovm", &induce_dpovm(&w, &switch_instruments().unwrap()).unwrap()).unwrap();
    let pauli = pauli_tomographic_set(1, "Q").unwrap();
    let recs: Vec<NamedOperator> = (0..3)
        .flat_map(|z| (0..2).map(move |c| (z, c)))
        .map(|(z, c)| NamedOperator {
            name: Some(format!("{}[c={}]", ["Z", "X", "Y"][z], c)),
            operator: pauli.element(z, c).clone(),
        })
        .collect();
    write_records(d.join("pauli_1q.txt"), &recs).unwrap();
    let scn = switch_ndi_scenario(0.0, false).unwrap();
    save_scenario(&d, "switch_ndi", &scn).unwrap();
    let wb = WitnessBundle::from_reference(&scn, SystemKind::P2fDefinition2, &SolveOptions::default()).unwrap();
    wb.save(d.join("switch_ndi_witness.json")).unwrap();
}

#[test]
fn bundled_fixtures_match_library() {
    if std::env::var_os("CAUSAL_CERT_REGEN_FIXTURES").is_some() {
        regenerate();
    }
    let d = dir();
    let w = load_process(d.join("switch.json")).unwrap();
    let rep = validate_process_matrix(&w).unwrap();
    assert!(rep.valid);
    assert!((rep.trace - 8.0).abs() < 1e-12);
    assert!(w.op().max_abs_diff(build_quantum_switch().unwrap().op()).unwrap() < 1e-15);
    assert!(validate_process_matrix(&load_process(d.join("white_noise.json")).unwrap()).unwrap().valid);

    let inst = load_instruments(d.join("switch_instruments.json")).unwrap();
    let fresh = switch_instruments().unwrap();
    for (k, i) in &fresh {
        assert_eq!(inst[k].elements(), i.elements());
    }
    let e = load_dpovm(d.join("switch_dpovm.json")).unwrap();
    assert_eq!(e, induce_dpovm(&w, &inst).unwrap());

    let pauli = read_records(d.join("pauli_1q.txt")).unwrap();
    assert_eq!(pauli.len(), 6);

    let scn = load_scenario(d.join("switch_ndi.json")).unwrap();
    let a = simulate_ndi(&scn).unwrap();
    let b = simulate_ndi(&switch_ndi_scenario(0.0, false).unwrap()).unwrap();
    assert!(a.max_abs_diff(&b).unwrap() < 1e-15);
    let wb = WitnessBundle::load(d.join("switch_ndi_witness.json")).unwrap();
    assert!(wb.reference_value < 0.0);
}
