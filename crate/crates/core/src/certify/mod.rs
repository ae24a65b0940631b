//! Witness arithmetic on observed correlations, Bell self-test values,
//! robustness bounds, threshold search and the DRF evaluator.

mod bell;
mod correlation;
mod drf;
mod robust;
mod threshold;

pub use bell::{bell_correlations, extended_chsh_value, optimal_party_settings, reference_bell_correlations, BellFunctional, EXTENDED_CHSH_TERMS};
pub use correlation::{condition_star, Axis, CorrelationTensor, NORMALIZATION_TOL};
pub use drf::{drf_value, DrfReport, DRF_CLASSICAL_BOUND, DRF_INPUT_CONVENTION};
pub use robust::{correction_bound, delta_norm_bound, robust_verdict, theta_from_bell_deficit, RobustnessLedger, Verdict};
pub use threshold::{threshold_search, Probe, ProbeRecord, ThresholdInterval, FEASIBLE_RESIDUAL_TOL};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dpovm::{induce_dpovm, p2f_sep_system_def2, CausalConstraintSystem, Dpovm};
use crate::error::{Error, Result};
use crate::process::{build_quantum_switch, depolarize, switch_instruments};
use crate::sdp::{herm_to_vec, SeparatingFunctional};
use crate::tensor_core::{LabeledOperator, SystemLabel};

/// Expansion tolerance for reconstructing witness operators from states.
pub const EXPANSION_TOL: f64 = 1e-9;

/// Quantum inputs available to one party: the states it can be fed.
#[derive(Clone, Debug)]
pub struct StateSet {
    pub labels: Vec<SystemLabel>,
    pub states: Vec<LabeledOperator>,
}

/// `s[i][k]`: coefficient of target element `i` on the product state tuple
/// `k` (first state set most significant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessCoefficients {
    pub state_counts: Vec<usize>,
    pub input_count: usize,
    pub outcome_count: usize,
    pub values: Vec<Vec<f64>>,
}

impl WitnessCoefficients {
    pub fn state_tuple_count(&self) -> usize {
        self.state_counts.iter().product()
    }

    pub fn split_state(&self, mut k: usize) -> Vec<usize> {
        let mut out = vec![0; self.state_counts.len()];
        for j in (0..out.len()).rev() {
            out[j] = k % self.state_counts[j];
            k /= self.state_counts[j];
        }
        out
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: self.values.iter().map(|r| vec![0.0; r.len()]).collect(),
            ..self.clone()
        }
    }
}

/// Witness operators in link convention, `J = Σ_i S_i * E_i`, with the
/// constant offset folded into identity terms (exact on normalized D-POVMs).
pub fn link_witness(sys: &CausalConstraintSystem, f: &SeparatingFunctional) -> Result<Vec<LabeledOperator>> {
    let ops = sys.witness_operators(f)?;
    let t = &sys.target;
    let d: usize = t.labels().iter().map(|l| l.dim).product();
    let shift = f.offset / (t.input_count() * d) as f64;
    let id = LabeledOperator::identity(t.labels().to_vec())?;
    ops.iter().map(|s| s.sub(&id.scale(shift))).collect()
}

/// `J(E) = Σ_i S_i * E_i` for link-convention operators.
pub fn witness_on_dpovm(ops: &[LabeledOperator], e: &Dpovm) -> Result<f64> {
    if ops.len() != e.elements().len() {
        return Err(Error::Shape("witness and D-POVM have different element counts".into()));
    }
    let mut total = 0.0;
    for (s, el) in ops.iter().zip(e.elements()) {
        total += s.link(el)?.as_scalar().ok_or_else(|| Error::Shape("witness does not close on the D-POVM".into()))?.re;
    }
    Ok(total)
}

/// Minimum-norm real coefficients with `S_i = Σ_k s_ik ⊗_j ρ_{j,k_j}`.
///
/// `ops` live on the D-POVM's quantum labels; `sets` cover them in order.
pub fn expand_witness_coefficients(ops: &[LabeledOperator], e: &Dpovm, sets: &[StateSet]) -> Result<WitnessCoefficients> {
    if ops.len() != e.elements().len() {
        return Err(Error::Shape("witness and D-POVM have different element counts".into()));
    }
    let covered: Vec<&str> = sets.iter().flat_map(|s| s.labels.iter().map(|l| l.name.as_str())).collect();
    let mut want: Vec<&str> = e.labels().iter().map(|l| l.name.as_str()).collect();
    let mut got = covered.clone();
    want.sort_unstable();
    got.sort_unstable();
    if want != got {
        return Err(Error::Shape(format!("state sets cover {:?}, D-POVM acts on {:?}", covered, want)));
    }
    let order: Vec<&str> = e.labels().iter().map(|l| l.name.as_str()).collect();
    let counts: Vec<usize> = sets.iter().map(|s| s.states.len()).collect();
    let k_total: usize = counts.iter().product();
    let d: usize = e.labels().iter().map(|l| l.dim).product();
    let mut columns = DMatrix::<f64>::zeros(d * d, k_total);
    for k in 0..k_total {
        let mut rem = k;
        let mut idx = vec![0; sets.len()];
        for j in (0..sets.len()).rev() {
            idx[j] = rem % counts[j];
            rem /= counts[j];
        }
        let mut prod = LabeledOperator::scalar(1.0.into());
        for (j, set) in sets.iter().enumerate() {
            let st = &set.states[idx[j]];
            if st.systems() != set.labels.as_slice() {
                return Err(Error::Shape("state does not live on its set's labels".into()));
            }
            prod = prod.tensor(st)?;
        }
        let v = herm_to_vec(prod.permuted(&order)?.matrix());
        columns.column_mut(k).copy_from_slice(&v);
    }
    let svd = columns.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10 * smax.max(1.0)).count();
    if rank < d * d {
        return Err(Error::InvalidArgument(format!(
            "state sets are not tomographically complete: rank {} < {}",
            rank,
            d * d
        )));
    }
    let pinv = svd.pseudo_inverse(1e-10 * smax).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut values = Vec::with_capacity(ops.len());
    for s in ops {
        if !s.is_hermitian(1e-9) {
            return Err(Error::NotHermitian(s.hermitian_deviation()));
        }
        let target = nalgebra::DVector::from_vec(herm_to_vec(s.permuted(&order)?.matrix()));
        let coef = &pinv * &target;
        let err = (&columns * &coef - &target).amax();
        if err > EXPANSION_TOL * (1.0 + target.amax()) {
            return Err(Error::InvalidArgument(format!("expansion residual {:.3e}", err)));
        }
        values.push(coef.iter().copied().collect());
    }
    Ok(WitnessCoefficients {
        state_counts: counts,
        input_count: e.input_count(),
        outcome_count: e.outcome_count(),
        values,
    })
}

/// `J = Σ s · P` on a tensor with inputs (state axes..., classical inputs...)
/// and the D-POVM outcomes; size-1 axes are immaterial.
pub fn witness_value(s: &WitnessCoefficients, p: &CorrelationTensor) -> Result<f64> {
    let k_total = s.state_tuple_count();
    if p.input_count() != k_total * s.input_count || p.outcome_count() != s.outcome_count {
        return Err(Error::Shape(format!(
            "tensor has {} inputs x {} outcomes, witness expects {} x {}",
            p.input_count(),
            p.outcome_count(),
            k_total * s.input_count,
            s.outcome_count
        )));
    }
    let mut j = 0.0;
    for (i, row) in s.values.iter().enumerate() {
        let (x, a) = (i / s.outcome_count, i % s.outcome_count);
        for (k, &c) in row.iter().enumerate() {
            if c != 0.0 {
                j += c * p.row(k * s.input_count + x)[a];
            }
        }
    }
    Ok(j)
}

/// Definition-2 system for the switch family with white noise `r`.
pub fn switch_family_system(r: f64) -> Result<CausalConstraintSystem> {
    let w = depolarize(&build_quantum_switch()?, r)?;
    p2f_sep_system_def2(&induce_dpovm(&w, &switch_instruments()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpovm::DpovmParty;
    use crate::sdp::{extract_witness, solve_feasibility, SolveOptions};
    use crate::tensor_core::pauli_tomographic_set;
    use proptest::prelude::*;

    fn q(n: &str) -> SystemLabel {
        SystemLabel::new(n, 2)
    }

    fn pauli_states(name: &str) -> StateSet {
        let f = pauli_tomographic_set(1, name).unwrap();
        StateSet {
            labels: vec![q(name)],
            states: (0..3).flat_map(|z| (0..2).map(move |c| (z, c))).map(|(z, c)| f.element(z, c).clone()).collect(),
        }
    }

    fn two_qubit_family() -> Dpovm {
        let (fa, fb) = (pauli_tomographic_set(1, "A'").unwrap(), pauli_tomographic_set(1, "B'").unwrap());
        let els: Vec<LabeledOperator> = (0..4).map(|c| fa.element(0, c / 2).tensor(fb.element(0, c % 2)).unwrap()).collect();
        let parties = vec![
            DpovmParty {
                name: "A".into(),
                quantum_inputs: vec![q("A'")],
                classical_inputs: 1,
                outcomes: 2,
            },
            DpovmParty {
                name: "B".into(),
                quantum_inputs: vec![q("B'")],
                classical_inputs: 1,
                outcomes: 2,
            },
        ];
        Dpovm::new(parties, els).unwrap()
    }

    #[test]
    fn indicator_expansion() {
        let e = two_qubit_family();
        let (sa, sb) = (pauli_states("A'"), pauli_states("B'"));
        let rho = sa.states[1].tensor(&sb.states[1]).unwrap();
        let ops = vec![rho.clone(), rho.scale(0.0), rho.scale(0.0), rho.scale(0.0)];
        let s = expand_witness_coefficients(&ops, &e, &[sa, sb]).unwrap();
        let (k, _) = s.values[0].iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(k, 6 + 1);
        assert!(s.values[1].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn indicator_expansion_on_a_basis() {
        let e = two_qubit_family();
        let basis = |name: &str| {
            let mut s = pauli_states(name);
            s.states = vec![s.states[0].clone(), s.states[1].clone(), s.states[2].clone(), s.states[4].clone()];
            s
        };
        let (sa, sb) = (basis("A'"), basis("B'"));
        let rho = sa.states[1].tensor(&sb.states[1]).unwrap();
        let ops = vec![rho.clone(); 4];
        let s = expand_witness_coefficients(&ops, &e, &[sa, sb]).unwrap();
        for (k, &v) in s.values[2].iter().enumerate() {
            let want = if k == 4 + 1 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_expansion_reconstructs() {
        let e = two_qubit_family();
        let id = LabeledOperator::identity(vec![q("A'"), q("B'")]).unwrap();
        let ops = vec![id.clone(); 4];
        let (sa, sb) = (pauli_states("A'"), pauli_states("B'"));
        let s = expand_witness_coefficients(&ops, &e, &[sa.clone(), sb.clone()]).unwrap();
        let mut rec = id.scale(0.0);
        for (k, &c) in s.values[0].iter().enumerate() {
            let ks = s.split_state(k);
            rec = rec.add(&sa.states[ks[0]].tensor(&sb.states[ks[1]]).unwrap().scale(c)).unwrap();
        }
        assert!(rec.max_abs_diff(&id).unwrap() < 1e-12);
    }

    #[test]
    fn incomplete_sets_are_rejected() {
        let e = two_qubit_family();
        let mut sa = pauli_states("A'");
        sa.states.truncate(3);
        let ops = vec![LabeledOperator::identity(vec![q("A'"), q("B'")]).unwrap(); 4];
        assert!(expand_witness_coefficients(&ops, &e, &[sa, pauli_states("B'")]).is_err());
    }

    #[test]
    fn zero_witness_and_axis_mismatch() {
        let s = WitnessCoefficients {
            state_counts: vec![6],
            input_count: 2,
            outcome_count: 2,
            values: vec![vec![0.0; 6]; 4],
        };
        let p = CorrelationTensor::uniform(vec![Axis::new("t", 6), Axis::new("x", 2)], vec![Axis::new("a", 2)]).unwrap();
        assert_eq!(witness_value(&s, &p).unwrap(), 0.0);
        let bad = CorrelationTensor::uniform(vec![Axis::new("t", 5), Axis::new("x", 2)], vec![Axis::new("a", 2)]).unwrap();
        assert!(witness_value(&s, &bad).is_err());
    }

    #[test]
    fn switch_witness_expands_and_is_negative_on_reference_states() {
        let sys = switch_family_system(0.0).unwrap();
        let p = sys.to_program().unwrap();
        let opts = SolveOptions::default();
        let f = extract_witness(&p, &solve_feasibility(&p, &opts).unwrap(), &opts).unwrap();
        let ops = link_witness(&sys, &f).unwrap();
        let j_direct = witness_on_dpovm(&ops, &sys.target).unwrap();
        assert!((j_direct - f.pairing).abs() < 1e-9, "{} vs {}", j_direct, f.pairing);
        let set = pauli_states("P'");
        let s = expand_witness_coefficients(&ops, &sys.target, std::slice::from_ref(&set)).unwrap();
        let j = witness_value(&s, &born_tensor(&sys.target, &set)).unwrap();
        assert!((j - j_direct).abs() < 1e-9);
        assert!(j < 0.0);
    }

    /// `P(a | k, x) = E_{a|x} * ρ_k` with the state axis first.
    fn born_tensor(e: &Dpovm, set: &StateSet) -> CorrelationTensor {
        let inputs = vec![Axis::new("t", set.states.len()), Axis::new("x", e.input_count())];
        let outcomes = vec![Axis::new("a", e.outcome_count())];
        CorrelationTensor::from_fn(inputs, outcomes, |i, o| {
            let el = &e.elements()[i[1] * e.outcome_count() + o[0]];
            el.link(&set.states[i[0]]).unwrap().as_scalar().unwrap().re
        })
        .unwrap()
    }

    proptest! {
        #[test]
        fn witness_value_is_bilinear(a in proptest::collection::vec(-1.0f64..1.0, 12), b in proptest::collection::vec(-1.0f64..1.0, 12), lam in 0.0f64..1.0) {
            let mk = |v: &[f64]| WitnessCoefficients { state_counts: vec![3], input_count: 2, outcome_count: 2, values: v.chunks(3).map(|c| c.to_vec()).collect() };
            let (sa, sb) = (mk(&a), mk(&b));
            let sum = WitnessCoefficients { values: sa.values.iter().zip(&sb.values).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect(), ..sa.clone() };
            let ax = vec![Axis::new("t", 3), Axis::new("x", 2)];
            let p1 = CorrelationTensor::from_fn(ax.clone(), vec![Axis::new("a", 2)], |i, o| if o[0] == (i[0] + i[1]) % 2 { 1.0 } else { 0.0 }).unwrap();
            let p2 = CorrelationTensor::uniform(ax.clone(), vec![Axis::new("a", 2)]).unwrap();
            let mix = CorrelationTensor::new(ax, vec![Axis::new("a", 2)], p1.values().iter().zip(p2.values()).map(|(x, y)| lam * x + (1.0 - lam) * y).collect()).unwrap();
            let v = |s: &WitnessCoefficients, p: &CorrelationTensor| witness_value(s, p).unwrap();
            prop_assert!((v(&sum, &p1) - v(&sa, &p1) - v(&sb, &p1)).abs() < 1e-12);
            prop_assert!((v(&sa, &mix) - lam * v(&sa, &p1) - (1.0 - lam) * v(&sa, &p2)).abs() < 1e-12);
        }
    }
}
