use std::collections::BTreeMap;

use super::{simulate_ndi, Link, NetworkScenario};
use crate::certify::{optimal_party_settings, CorrelationTensor};
use crate::error::{Error, Result};
use crate::process::{build_quantum_switch, depolarize, switch_instruments, Instrument, ProcessMatrix};
use crate::tensor_core::{choi_identity_channel, maximally_entangled, pauli_tomographic_set, LabeledOperator, MeasurementFamily, SystemLabel, C64};

/// Phil's certification setting; settings 0..6 are the Bell measurements.
pub const PHIL_STAR: usize = 6;

fn q(n: &str) -> SystemLabel {
    SystemLabel::new(n, 2)
}

/// Phil measures `P'` with one of the six optimal observables and sends
/// `|0⟩` on, or (setting `⋆`) forwards `P'` into the process with outcome 0.
pub fn phil_instrument() -> Result<Instrument> {
    let settings = optimal_party_settings(q("P'"))?;
    let zero = LabeledOperator::basis_projector(q("P"), 0)?;
    let mut rows = Vec::with_capacity(7);
    for x in 0..settings.setting_count() {
        rows.push((0..2).map(|a| settings.element(x, a).tensor(&zero)).collect::<Result<Vec<_>>>()?);
    }
    let forward = choi_identity_channel(q("P'"), q("P"))?;
    rows.push(vec![forward.clone(), forward.scale(0.0)]);
    Instrument::new("P", vec![q("P'")], None, Some(q("P")), rows)
}

/// Emily's Pauli measurements, each also listed with its outcomes swapped
/// so that the `e = 0` rounds herald all six eigenstates.
pub fn emily_measurement() -> Result<MeasurementFamily> {
    pauli_tomographic_set(1, "E'")?.with_relabelled_copies(&[0, 1, 2])
}

/// Fiona measuring `X` (`v = 0`) or `Y` (`v = 1`).
pub fn fiona_two_settings() -> Result<Instrument> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ket = |b: C64| LabeledOperator::from_ket(vec![q("F")], &[C64::new(s, 0.0), b * s]);
    let i = C64::new(0.0, 1.0);
    let rows = vec![
        vec![ket(C64::new(1.0, 0.0))?, ket(C64::new(-1.0, 0.0))?],
        vec![ket(i)?, ket(-i)?],
    ];
    Instrument::new("F", vec![], Some(q("F")), None, rows)
}

/// The depolarized switch with Phil fed remotely by Emily through `|φ+⟩`.
/// With `drf_fiona`, Fiona gets a second setting so the tensor has a binary `v`.
pub fn switch_ndi_scenario(r: f64, drf_fiona: bool) -> Result<NetworkScenario> {
    let process = depolarize(&build_quantum_switch()?, r)?;
    let mut instruments = switch_instruments()?;
    instruments.insert("P".into(), phil_instrument()?);
    if drf_fiona {
        instruments.insert("F".into(), fiona_two_settings()?);
    }
    Ok(NetworkScenario {
        process,
        instruments,
        links: vec![Link {
            preparer: "E".into(),
            party: "P".into(),
            measurement: emily_measurement()?,
            shared: maximally_entangled(q("E'"), q("P'"))?,
            bell_settings: vec![0, 1, 2],
            party_bell_settings: (0..6).collect(),
        }],
        star: BTreeMap::from([("P".to_string(), PHIL_STAR)]),
    })
}

/// Correlations over `(e, p, a, b, f | t, u, z, w, v)` for a P+2+F process
/// where only Phil receives quantum inputs, remotely prepared by Emily.
pub fn simulate_p2f_phil_emily(
    w: &ProcessMatrix,
    instruments: &BTreeMap<String, Instrument>,
    emily: &MeasurementFamily,
    shared: &LabeledOperator,
    star: usize,
) -> Result<CorrelationTensor> {
    let names: Vec<&str> = w.parties().iter().map(|p| p.name.as_str()).collect();
    if names != ["P", "A", "B", "F"] {
        return Err(Error::Shape(format!("expected parties P, A, B, F, got {:?}", names)));
    }
    let scn = NetworkScenario {
        process: w.clone(),
        instruments: instruments.clone(),
        links: vec![Link {
            preparer: "E".into(),
            party: "P".into(),
            measurement: emily.clone(),
            shared: shared.clone(),
            bell_settings: vec![],
            party_bell_settings: vec![],
        }],
        star: BTreeMap::from([("P".to_string(), star)]),
    };
    simulate_ndi(&scn)?.with_axis_names(&["t", "u", "z", "w", "v"], &["e", "p", "a", "b", "f"])
}

/// `(e, a, b, f | t, z, w, v)` slice for the DRF functional: Phil at `⋆`,
/// Emily restricted to her first two settings, Phil's outcome summed out.
pub fn drf_slice(p: &CorrelationTensor) -> Result<CorrelationTensor> {
    let u = p.input_axis("u")?;
    let star = p.inputs()[u]
        .star
        .ok_or_else(|| Error::InvalidArgument("axis `u` has no star setting".into()))?;
    p.fix_input("u", star)?.select_input("t", &[0, 1])?.marginal(&["e", "a", "b", "f"])
}
