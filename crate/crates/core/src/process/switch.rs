use std::collections::BTreeMap;

use super::{Instrument, Party, ProcessMatrix};
use crate::error::Result;
use crate::tensor_core::{choi_identity_channel, LabeledOperator, SystemLabel, C64};

fn q(n: &str) -> SystemLabel {
    SystemLabel::new(n, 2)
}

/// Parties of the switch scenario: Phil (output only), Alice, Bob, Fiona (input only).
pub fn switch_parties() -> Vec<Party> {
    vec![
        Party::new("P", None, Some(q("P"))),
        Party::qubits("A"),
        Party::qubits("B"),
        Party::new("F", Some(q("F")), None),
    ]
}

/// The quantum switch with the target prepared in |0> and the target output discarded.
///
/// Systems are ordered `P, A_I, A_O, B_I, B_O, F`; the trace is 8.
pub fn build_quantum_switch() -> Result<ProcessMatrix> {
    // P, P_t, A_I, A_O, B_I, B_O, F, F_t
    let names = ["P", "P_t", "A_I", "A_O", "B_I", "B_O", "F", "F_t"];
    let labels: Vec<SystemLabel> = names.iter().map(|n| q(n)).collect();
    let mut ket = vec![C64::new(0.0, 0.0); 256];
    for (idx, amp) in ket.iter_mut().enumerate() {
        let bit = |k: usize| (idx >> (7 - k)) & 1;
        let (p, pt, ai, ao, bi, bo, f, ft) = (bit(0), bit(1), bit(2), bit(3), bit(4), bit(5), bit(6), bit(7));
        let first = p == 0 && f == 0 && pt == ai && ao == bi && bo == ft;
        let second = p == 1 && f == 1 && pt == bi && bo == ai && ao == ft;
        if first || second {
            *amp = C64::new(1.0, 0.0);
        }
    }
    let full = LabeledOperator::from_ket(labels, &ket)?;
    let target = LabeledOperator::basis_projector(q("P_t"), 0)?;
    let w = full.link(&target)?.partial_trace(&["F_t"])?;
    let w = w.permuted(&["P", "A_I", "A_O", "B_I", "B_O", "F"])?;
    ProcessMatrix::new(w, switch_parties())
}

/// Phil forwards `P'` into the control, Alice and Bob measure in the computational
/// basis and re-prepare |z>, |w>, Fiona measures in the |+>, |-> basis.
pub fn switch_instruments() -> Result<BTreeMap<String, Instrument>> {
    let mut out = BTreeMap::new();
    let phil = choi_identity_channel(q("P'"), q("P"))?;
    out.insert("P".to_string(), Instrument::new("P", vec![q("P'")], None, Some(q("P")), vec![vec![phil]])?);
    for name in ["A", "B"] {
        let (i, o) = (q(&format!("{}_I", name)), q(&format!("{}_O", name)));
        let mut rows = Vec::new();
        for z in 0..2 {
            let prep = LabeledOperator::basis_projector(o.clone(), z)?;
            let row = (0..2)
                .map(|a| LabeledOperator::basis_projector(i.clone(), a)?.tensor(&prep))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        out.insert(name.to_string(), Instrument::new(name, vec![], Some(i), Some(o), rows)?);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = LabeledOperator::from_ket(vec![q("F")], &[C64::new(s, 0.0), C64::new(s, 0.0)])?;
    let minus = LabeledOperator::from_ket(vec![q("F")], &[C64::new(s, 0.0), C64::new(-s, 0.0)])?;
    out.insert("F".to_string(), Instrument::new("F", vec![], Some(q("F")), None, vec![vec![plus, minus]])?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{depolarize, ordered_process_check, validate_process_matrix};

    #[test]
    fn switch_is_valid_rank_two_trace_eight() {
        let w = build_quantum_switch().unwrap();
        let rep = validate_process_matrix(&w).unwrap();
        assert!(rep.valid, "{:?}", rep);
        assert!((rep.trace - 8.0).abs() < 1e-12);
        let rank = w.op().eigenvalues().iter().filter(|&&v| v > 1e-9).count();
        assert_eq!(rank, 2);
    }

    #[test]
    fn switch_has_no_definite_order() {
        let w = build_quantum_switch().unwrap();
        assert!(!ordered_process_check(&w, &["P", "A", "B", "F"]).unwrap());
        assert!(!ordered_process_check(&w, &["P", "B", "A", "F"]).unwrap());
        let noisy = depolarize(&w, 3.0).unwrap();
        assert!(validate_process_matrix(&noisy).unwrap().valid);
    }

    #[test]
    fn white_noise_is_identity_over_eight() {
        let w = build_quantum_switch().unwrap();
        let n = w.white_noise().unwrap();
        assert!((n.matrix()[(0, 0)].re - 0.125).abs() < 1e-15);
        let pw = w.with_op(n).unwrap();
        assert!(validate_process_matrix(&pw).unwrap().valid);
        assert!(ordered_process_check(&pw, &["P", "A", "B", "F"]).unwrap());
        assert!(ordered_process_check(&pw, &["F", "B", "A", "P"]).unwrap());
    }

    #[test]
    fn instruments_are_trace_preserving() {
        let inst = switch_instruments().unwrap();
        for i in inst.values() {
            i.validate().unwrap();
        }
        let a = &inst["A"];
        assert_eq!((a.classical_inputs(), a.outcomes()), (2, 2));
        for z in 0..2 {
            for x in 0..2 {
                let rank = a.element(z, x).eigenvalues().iter().filter(|&&v| v > 1e-9).count();
                assert_eq!(rank, 1);
            }
        }
        let f = &inst["F"];
        let sum = f.element(0, 0).add(f.element(0, 1)).unwrap();
        assert!(sum.max_abs_diff(&LabeledOperator::identity(vec![q("F")]).unwrap()).unwrap() < 1e-15);
    }
}
