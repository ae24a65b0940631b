//! Distributed POVMs induced by processes, and the separability constraint
//! systems built on top of them.

mod effective;
mod systems;

pub use effective::{effective_dpovm, PartyEmbedding};
pub use systems::{
    bipartite_sep_system, nmdci_sep_system, p2f_sep_system_def1, p2f_sep_system_def2, CausalConstraintSystem, Equation, SystemKind,
    Term, VarBlock,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{Instrument, ProcessMatrix, PROCESS_TOL};
use crate::tensor_core::text::{read_records, write_records, NamedOperator};
use crate::tensor_core::{LabeledOperator, SystemLabel, PSD_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpovmParty {
    pub name: String,
    pub quantum_inputs: Vec<SystemLabel>,
    pub classical_inputs: usize,
    pub outcomes: usize,
}

/// Elements indexed by (classical-input tuple, outcome tuple), both
/// enumerated lexicographically with the first party most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct Dpovm {
    parties: Vec<DpovmParty>,
    labels: Vec<SystemLabel>,
    elements: Vec<LabeledOperator>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DpovmReport {
    pub min_eigenvalue: f64,
    pub normalization_error: f64,
}

fn mixed_radix(index: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    let mut rest = index;
    for k in (0..radices.len()).rev() {
        out[k] = rest % radices[k];
        rest /= radices[k];
    }
    out
}

fn flatten(digits: &[usize], radices: &[usize]) -> usize {
    digits.iter().zip(radices).fold(0, |acc, (d, r)| acc * r + d)
}

impl Dpovm {
    /// `elements` are listed input-major; each is permuted to canonical label order.
    pub fn new(parties: Vec<DpovmParty>, elements: Vec<LabeledOperator>) -> Result<Self> {
        let labels: Vec<SystemLabel> = parties.iter().flat_map(|p| p.quantum_inputs.iter().cloned()).collect();
        let order: Vec<&str> = labels.iter().map(|l| l.name.as_str()).collect();
        let n_in: usize = parties.iter().map(|p| p.classical_inputs).product();
        let n_out: usize = parties.iter().map(|p| p.outcomes).product();
        if parties.iter().any(|p| p.classical_inputs == 0 || p.outcomes == 0) {
            return Err(Error::InvalidArgument("every party needs at least one input and one outcome".into()));
        }
        if elements.len() != n_in * n_out {
            return Err(Error::Shape(format!("{} elements given, expected {}", elements.len(), n_in * n_out)));
        }
        let elements = elements
            .into_iter()
            .map(|e| {
                let p = e.permuted(&order)?;
                if p.systems() != labels.as_slice() {
                    return Err(Error::Shape(format!("element on {:?}, expected {:?}", e.names(), order)));
                }
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { parties, labels, elements })
    }

    pub fn parties(&self) -> &[DpovmParty] {
        &self.parties
    }

    pub fn labels(&self) -> &[SystemLabel] {
        &self.labels
    }

    pub fn elements(&self) -> &[LabeledOperator] {
        &self.elements
    }

    pub fn input_radices(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.classical_inputs).collect()
    }

    pub fn outcome_radices(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.outcomes).collect()
    }

    pub fn input_count(&self) -> usize {
        self.input_radices().iter().product()
    }

    pub fn outcome_count(&self) -> usize {
        self.outcome_radices().iter().product()
    }

    pub fn index(&self, inputs: &[usize], outcomes: &[usize]) -> usize {
        flatten(inputs, &self.input_radices()) * self.outcome_count() + flatten(outcomes, &self.outcome_radices())
    }

    /// (inputs, outcomes) of a flat element index.
    pub fn split_index(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let n = self.outcome_count();
        (mixed_radix(i / n, &self.input_radices()), mixed_radix(i % n, &self.outcome_radices()))
    }

    pub fn element(&self, inputs: &[usize], outcomes: &[usize]) -> &LabeledOperator {
        &self.elements[self.index(inputs, outcomes)]
    }

    pub fn report(&self) -> Result<DpovmReport> {
        let mut min_eig = f64::INFINITY;
        let mut norm: f64 = 0.0;
        let n = self.outcome_count();
        let id = LabeledOperator::identity(self.labels.clone())?;
        for chunk in self.elements.chunks(n) {
            let mut sum = LabeledOperator::zeros(self.labels.clone())?;
            for e in chunk {
                min_eig = min_eig.min(e.hermitian_part().min_eigenvalue());
                sum = sum.add(e)?;
            }
            norm = norm.max(sum.max_abs_diff(&id)?);
        }
        Ok(DpovmReport {
            min_eigenvalue: min_eig,
            normalization_error: norm,
        })
    }

    pub fn is_valid(&self) -> Result<bool> {
        let r = self.report()?;
        Ok(r.min_eigenvalue >= -PSD_TOL && r.normalization_error <= PROCESS_TOL)
    }

    /// Restricts each party to one classical input.
    pub fn fix_inputs(&self, inputs: &[usize]) -> Result<Self> {
        if inputs.len() != self.parties.len() {
            return Err(Error::Shape("one input per party required".into()));
        }
        let parties: Vec<DpovmParty> = self
            .parties
            .iter()
            .map(|p| DpovmParty {
                classical_inputs: 1,
                ..p.clone()
            })
            .collect();
        let n = self.outcome_count();
        let start = flatten(inputs, &self.input_radices()) * n;
        Self::new(parties, self.elements[start..start + n].to_vec())
    }

    /// Restricts one party's classical input to the given setting.
    pub fn fix_party_input(&self, party: usize, setting: usize) -> Result<Self> {
        let mut parties = self.parties.clone();
        parties[party].classical_inputs = 1;
        let radices = self.input_radices();
        let mut elements = Vec::new();
        for i in 0..self.input_count() {
            let digits = mixed_radix(i, &radices);
            if digits[party] == setting {
                let n = self.outcome_count();
                elements.extend_from_slice(&self.elements[i * n..(i + 1) * n]);
            }
        }
        Self::new(parties, elements)
    }

    pub fn map_elements(&self, f: impl Fn(&LabeledOperator) -> Result<LabeledOperator>) -> Result<Self> {
        let elements = self.elements.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.parties.clone(), elements)
    }

    /// Mixes every element with `(1/N_outcomes) 1`: (E + r 1/N)/(1 + r).
    pub fn depolarize(&self, r: f64) -> Result<Self> {
        let n = self.outcome_count() as f64;
        let id = LabeledOperator::identity(self.labels.clone())?.scale(1.0 / n);
        self.map_elements(|e| Ok(e.add(&id.scale(r))?.scale(1.0 / (1.0 + r))))
    }
}

/// Induced D-POVM: every element is `(⊗ instruments) * W`.
pub fn induce_dpovm(w: &ProcessMatrix, instruments: &BTreeMap<String, Instrument>) -> Result<Dpovm> {
    for p in w.parties() {
        let inst = instruments
            .get(&p.name)
            .ok_or_else(|| Error::InvalidArgument(format!("no instrument for party `{}`", p.name)))?;
        if inst.input() != p.input.as_ref() || inst.output() != p.output.as_ref() {
            return Err(Error::InvalidArgument(format!("instrument labels for `{}` do not match the process", p.name)));
        }
        for q in inst.quantum_inputs() {
            if w.op().has(&q.name) {
                return Err(Error::LabelCollision(q.name.clone()));
            }
        }
    }
    if instruments.len() != w.parties().len() {
        return Err(Error::InvalidArgument("instruments given for parties absent from the process".into()));
    }
    let insts: Vec<&Instrument> = w.parties().iter().map(|p| &instruments[&p.name]).collect();
    let parties: Vec<DpovmParty> = insts
        .iter()
        .map(|i| DpovmParty {
            name: i.party().to_string(),
            quantum_inputs: i.quantum_inputs().to_vec(),
            classical_inputs: i.classical_inputs(),
            outcomes: i.outcomes(),
        })
        .collect();
    let in_radices: Vec<usize> = parties.iter().map(|p| p.classical_inputs).collect();
    let out_radices: Vec<usize> = parties.iter().map(|p| p.outcomes).collect();
    let n_in: usize = in_radices.iter().product();
    let n_out: usize = out_radices.iter().product();

    // Contract party by party; partial results are indexed by the (input, outcome) prefix.
    let mut level: Vec<LabeledOperator> = vec![w.op().clone()];
    for inst in &insts {
        let mut next = Vec::with_capacity(level.len() * inst.classical_inputs() * inst.outcomes());
        for t in &level {
            for x in 0..inst.classical_inputs() {
                for a in 0..inst.outcomes() {
                    next.push(inst.element(x, a).link(t)?);
                }
            }
        }
        level = next;
    }
    // `level` is ordered by (x1, a1, x2, a2, ...); reorder to input-major.
    let k = insts.len();
    let mut radices = Vec::with_capacity(2 * k);
    for p in &parties {
        radices.push(p.classical_inputs);
        radices.push(p.outcomes);
    }
    let mut elements = vec![None; n_in * n_out];
    for (pos, e) in level.into_iter().enumerate() {
        let d = mixed_radix(pos, &radices);
        let xs: Vec<usize> = (0..k).map(|i| d[2 * i]).collect();
        let as_: Vec<usize> = (0..k).map(|i| d[2 * i + 1]).collect();
        elements[flatten(&xs, &in_radices) * n_out + flatten(&as_, &out_radices)] = Some(e);
    }
    Dpovm::new(parties, elements.into_iter().map(|e| e.unwrap()).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DpovmManifest {
    pub parties: Vec<DpovmPartySpec>,
    /// Records ordered input-major, then outcome, first party most significant.
    pub elements: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DpovmPartySpec {
    pub name: String,
    #[serde(default)]
    pub quantum_inputs: Vec<String>,
    #[serde(default = "one")]
    pub classical_inputs: usize,
    pub outcomes: usize,
}

fn one() -> usize {
    1
}

pub fn save_dpovm(dir: impl AsRef<Path>, stem: &str, e: &Dpovm) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let file = format!("{}.txt", stem);
    let recs: Vec<NamedOperator> = e
        .elements()
        .iter()
        .enumerate()
        .map(|(i, op)| {
            let (x, a) = e.split_index(i);
            NamedOperator {
                name: Some(format!("x={:?} a={:?}", x, a)),
                operator: op.clone(),
            }
        })
        .collect();
    write_records(dir.join(&file), &recs)?;
    let m = DpovmManifest {
        parties: e
            .parties()
            .iter()
            .map(|p| DpovmPartySpec {
                name: p.name.clone(),
                quantum_inputs: p.quantum_inputs.iter().map(|l| l.name.clone()).collect(),
                classical_inputs: p.classical_inputs,
                outcomes: p.outcomes,
            })
            .collect(),
        elements: file,
    };
    let json = dir.join(format!("{}.json", stem));
    std::fs::write(&json, serde_json::to_string_pretty(&m)?)?;
    Ok(json)
}

pub fn load_dpovm(path: impl AsRef<Path>) -> Result<Dpovm> {
    let path = path.as_ref();
    let m: DpovmManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let recs = read_records(base.join(&m.elements))?;
    let first = recs
        .first()
        .ok_or_else(|| Error::Parse("D-POVM file has no elements".into()))?
        .operator
        .clone();
    let parties = m
        .parties
        .iter()
        .map(|p| {
            let q = p
                .quantum_inputs
                .iter()
                .map(|n| first.label(n).cloned().ok_or_else(|| Error::UnknownLabel(n.clone())))
                .collect::<Result<Vec<_>>>()?;
            Ok(DpovmParty {
                name: p.name.clone(),
                quantum_inputs: q,
                classical_inputs: p.classical_inputs,
                outcomes: p.outcomes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dpovm::new(parties, recs.into_iter().map(|r| r.operator).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::random::{random_instrument, random_ordered_process, random_valid_process};
    use crate::process::{build_quantum_switch, switch_instruments, Party};
    use crate::tensor_core::{pauli_tomographic_set, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: &str) -> SystemLabel {
        SystemLabel::new(n, 2)
    }

    #[test]
    fn single_party_born_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = crate::process::random::random_state(vec![q("A_I")], &mut rng).unwrap();
        let w = ProcessMatrix::new(rho.clone(), vec![Party::new("A", Some(q("A_I")), None)]).unwrap();
        let povm = pauli_tomographic_set(1, "A_I").unwrap();
        let inst = Instrument::new("A", vec![], Some(q("A_I")), None, (0..3).map(|s| povm.setting(s).to_vec()).collect()).unwrap();
        let mut map = BTreeMap::new();
        map.insert("A".to_string(), inst);
        let e = induce_dpovm(&w, &map).unwrap();
        assert_eq!(e.labels().len(), 0);
        for s in 0..3 {
            for c in 0..2 {
                let want = (povm.element(s, c).matrix().transpose() * rho.matrix()).trace();
                let got = e.element(&[s], &[c]).as_scalar().unwrap();
                assert!((got - want).norm() < 1e-12);
            }
        }
        assert!(e.is_valid().unwrap());
    }

    #[test]
    fn switch_family_is_normalized_on_phil_input() {
        let w = build_quantum_switch().unwrap();
        let e = induce_dpovm(&w, &switch_instruments().unwrap()).unwrap();
        assert_eq!(e.labels(), &[q("P'")]);
        assert_eq!((e.input_count(), e.outcome_count()), (4, 8));
        let rep = e.report().unwrap();
        assert!(rep.normalization_error < 1e-12 && rep.min_eigenvalue > -1e-12);
    }

    #[test]
    fn switch_correlations_are_order_entangled() {
        // Control |0>: A then B; A measures |0> from the target, B reads A's re-preparation.
        let w = build_quantum_switch().unwrap();
        let e = induce_dpovm(&w, &switch_instruments().unwrap()).unwrap();
        let ctrl0 = LabeledOperator::basis_projector(q("P'"), 0).unwrap();
        for z in 0..2 {
            let p: f64 = (0..2).map(|f| e.element(&[0, z, 0, 0], &[0, 0, z, f]).link(&ctrl0).unwrap().as_scalar().unwrap().re).sum();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_quantum_inputs_gives_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let parties = vec![Party::qubits("A"), Party::qubits("B")];
        let w = random_valid_process(&parties, &mut rng).unwrap();
        let mut map = BTreeMap::new();
        map.insert("A".into(), random_instrument("A", vec![], Some(q("A_I")), Some(q("A_O")), 2, 2, &mut rng).unwrap());
        map.insert("B".into(), random_instrument("B", vec![], Some(q("B_I")), Some(q("B_O")), 2, 3, &mut rng).unwrap());
        let e = induce_dpovm(&w, &map).unwrap();
        for x in 0..4 {
            let s: C64 = e.elements()[x * 6..(x + 1) * 6].iter().map(|o| o.as_scalar().unwrap()).sum();
            assert!((s.re - 1.0).abs() < 1e-9 && s.im.abs() < 1e-12);
        }
    }

    #[test]
    fn ordered_process_marginal_is_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parties = vec![Party::qubits("A"), Party::qubits("B")];
        let w = random_ordered_process(&parties, &["A", "B"], 2, &mut rng).unwrap();
        let mut map = BTreeMap::new();
        map.insert("A".into(), random_instrument("A", vec![q("A'")], Some(q("A_I")), Some(q("A_O")), 1, 2, &mut rng).unwrap());
        map.insert("B".into(), random_instrument("B", vec![q("B'")], Some(q("B_I")), Some(q("B_O")), 1, 2, &mut rng).unwrap());
        let e = induce_dpovm(&w, &map).unwrap();
        assert!(e.is_valid().unwrap());
        for a in 0..2 {
            let m = e.element(&[0, 0], &[a, 0]).add(e.element(&[0, 0], &[a, 1])).unwrap();
            assert!(m.max_abs_diff(&m.trace_replace(&["B'"]).unwrap()).unwrap() < 1e-9);
        }
    }

    #[test]
    fn missing_instrument_is_an_error() {
        let w = build_quantum_switch().unwrap();
        let mut inst = switch_instruments().unwrap();
        inst.remove("F");
        assert!(induce_dpovm(&w, &inst).is_err());
    }

    #[test]
    fn manifest_roundtrip_and_fixing() {
        let w = build_quantum_switch().unwrap();
        let e = induce_dpovm(&w, &switch_instruments().unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = save_dpovm(dir.path(), "fam", &e).unwrap();
        assert_eq!(load_dpovm(path).unwrap(), e);
        let fixed = e.fix_party_input(1, 1).unwrap();
        assert_eq!(fixed.input_count(), 2);
        assert_eq!(fixed.element(&[0, 0, 1, 0], &[0, 1, 0, 1]), e.element(&[0, 1, 1, 0], &[0, 1, 0, 1]));
        assert!(fixed.is_valid().unwrap());
    }
}
