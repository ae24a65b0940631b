use serde::{Deserialize, Serialize};

use super::PROCESS_TOL;
use crate::error::{Error, Result};
use crate::tensor_core::{LabeledOperator, MeasurementFamily, SystemLabel, PSD_TOL};

/// A party's quantum instrument, one per classical input.
///
/// Elements act on the quantum-input labels (e.g. `A'`) together with the
/// party's own input/output labels and are stored in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    party: String,
    quantum_inputs: Vec<SystemLabel>,
    input: Option<SystemLabel>,
    output: Option<SystemLabel>,
    elements: Vec<Vec<LabeledOperator>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstrumentReport {
    pub min_eigenvalue: f64,
    pub trace_preservation_error: f64,
}

impl Instrument {
    /// `elements[x][a]`; each element is permuted into canonical label order.
    pub fn new(
        party: &str,
        quantum_inputs: Vec<SystemLabel>,
        input: Option<SystemLabel>,
        output: Option<SystemLabel>,
        elements: Vec<Vec<LabeledOperator>>,
    ) -> Result<Self> {
        if elements.is_empty() || elements[0].is_empty() {
            return Err(Error::InvalidArgument(format!("instrument for `{}` has no elements", party)));
        }
        let outcomes = elements[0].len();
        let mut labels = quantum_inputs.clone();
        labels.extend(input.iter().cloned());
        labels.extend(output.iter().cloned());
        let order: Vec<&str> = labels.iter().map(|l| l.name.as_str()).collect();
        let mut canon = Vec::with_capacity(elements.len());
        for (x, row) in elements.into_iter().enumerate() {
            if row.len() != outcomes {
                return Err(Error::Shape(format!("input {} has {} outcomes, expected {}", x, row.len(), outcomes)));
            }
            let mut out = Vec::with_capacity(outcomes);
            for e in row {
                let p = e.permuted(&order)?;
                if p.systems() != labels.as_slice() {
                    return Err(Error::Shape(format!("element labels {:?} do not match instrument labels {:?}", e.names(), order)));
                }
                out.push(p);
            }
            canon.push(out);
        }
        Ok(Self {
            party: party.to_string(),
            quantum_inputs,
            input,
            output,
            elements: canon,
        })
    }

    pub fn party(&self) -> &str {
        &self.party
    }

    pub fn quantum_inputs(&self) -> &[SystemLabel] {
        &self.quantum_inputs
    }

    pub fn input(&self) -> Option<&SystemLabel> {
        self.input.as_ref()
    }

    pub fn output(&self) -> Option<&SystemLabel> {
        self.output.as_ref()
    }

    pub fn classical_inputs(&self) -> usize {
        self.elements.len()
    }

    pub fn outcomes(&self) -> usize {
        self.elements[0].len()
    }

    pub fn element(&self, x: usize, a: usize) -> &LabeledOperator {
        &self.elements[x][a]
    }

    pub fn elements(&self) -> &[Vec<LabeledOperator>] {
        &self.elements
    }

    pub fn report(&self) -> Result<InstrumentReport> {
        let mut min_eig = f64::INFINITY;
        let mut tp: f64 = 0.0;
        let out: Vec<&str> = self.output.iter().map(|l| l.name.as_str()).collect();
        for row in &self.elements {
            let mut sum: Option<LabeledOperator> = None;
            for e in row {
                min_eig = min_eig.min(e.hermitian_part().min_eigenvalue());
                let r = e.partial_trace(&out)?;
                sum = Some(match sum {
                    None => r,
                    Some(s) => s.add(&r)?,
                });
            }
            let s = sum.unwrap();
            let id = LabeledOperator::identity(s.systems().to_vec())?;
            tp = tp.max(s.max_abs_diff(&id)?);
        }
        Ok(InstrumentReport {
            min_eigenvalue: min_eig,
            trace_preservation_error: tp,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.report()?;
        if r.min_eigenvalue < -PSD_TOL {
            return Err(Error::InvalidArgument(format!(
                "instrument `{}` has an element with eigenvalue {:.3e}",
                self.party, r.min_eigenvalue
            )));
        }
        if r.trace_preservation_error > PROCESS_TOL {
            return Err(Error::InvalidArgument(format!(
                "instrument `{}` is not trace preserving (error {:.3e})",
                self.party, r.trace_preservation_error
            )));
        }
        Ok(())
    }
}

/// `choi(x, a) = povm(a) ⊗ prepared[x]`, with the POVM in Choi form on the
/// party input and states on the party output.
///
/// A single-setting POVM is shared by all inputs; otherwise setting `x` is used.
pub fn measure_and_prepare_instrument(party: &str, povm: &MeasurementFamily, prepared: &[LabeledOperator]) -> Result<Instrument> {
    if prepared.is_empty() {
        return Err(Error::InvalidArgument("no prepared states".into()));
    }
    let out_label = match prepared[0].systems() {
        [l] => l.clone(),
        other => return Err(Error::Shape(format!("prepared states must live on one system, got {} systems", other.len()))),
    };
    if povm.setting_count() != 1 && povm.setting_count() != prepared.len() {
        return Err(Error::Shape(format!(
            "{} POVM settings for {} classical inputs",
            povm.setting_count(),
            prepared.len()
        )));
    }
    let mut elements = Vec::with_capacity(prepared.len());
    for (x, state) in prepared.iter().enumerate() {
        if state.systems() != std::slice::from_ref(&out_label) {
            return Err(Error::Shape(format!("prepared state {} is not on {}", x, out_label)));
        }
        let s = if povm.setting_count() == 1 { 0 } else { x };
        let row = povm.setting(s).iter().map(|m| m.tensor(state)).collect::<Result<Vec<_>>>()?;
        elements.push(row);
    }
    Instrument::new(party, vec![], Some(povm.label().clone()), Some(out_label), elements)
}

/// Whether every `Tr_{out} M_{a|x}` factorizes as `M' ⊗ 1` on `tilde_out`
/// with the extracted `M'` summing to the identity.
pub fn check_mdci_factorization(inst: &Instrument, tilde_in: &[&str], tilde_out: &[&str]) -> Result<bool> {
    let qnames: Vec<&str> = inst.quantum_inputs().iter().map(|l| l.name.as_str()).collect();
    let mut split: Vec<&str> = tilde_in.iter().chain(tilde_out.iter()).copied().collect();
    split.sort_unstable();
    let mut q = qnames.clone();
    q.sort_unstable();
    if split != q || split.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!(
            "split {:?} / {:?} does not partition quantum inputs {:?}",
            tilde_in, tilde_out, qnames
        )));
    }
    let d_out: usize = inst
        .quantum_inputs()
        .iter()
        .filter(|l| tilde_out.contains(&l.name.as_str()))
        .map(|l| l.dim)
        .product();
    let out: Vec<&str> = inst.output().iter().map(|l| l.name.as_str()).collect();
    for row in inst.elements() {
        let mut sum: Option<LabeledOperator> = None;
        for e in row {
            let x = e.partial_trace(&out)?;
            let r = x.trace_replace(tilde_out)?;
            if x.max_abs_diff(&r)? > PROCESS_TOL {
                return Ok(false);
            }
            let reduced = x.partial_trace(tilde_out)?.scale(1.0 / d_out as f64);
            sum = Some(match sum {
                None => reduced,
                Some(s) => s.add(&reduced)?,
            });
        }
        let s = sum.unwrap();
        let id = LabeledOperator::identity(s.systems().to_vec())?;
        if s.max_abs_diff(&id)? > PROCESS_TOL {
            return Ok(false);
        }
    }
    Ok(true)
}
