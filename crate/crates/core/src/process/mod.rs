//! Process matrices, their validity conditions and causal-order checks.

mod instrument;
pub mod manifest;
pub mod random;
mod switch;

pub use instrument::{check_mdci_factorization, measure_and_prepare_instrument, Instrument};
pub use switch::{build_quantum_switch, switch_instruments, switch_parties};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_core::{LabeledOperator, SystemLabel, C64, PSD_TOL};

/// Tolerance for validity and ordering checks.
pub const PROCESS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Party {
    pub name: String,
    pub input: Option<SystemLabel>,
    pub output: Option<SystemLabel>,
}

impl Party {
    pub fn new(name: &str, input: Option<SystemLabel>, output: Option<SystemLabel>) -> Self {
        Self {
            name: name.to_string(),
            input,
            output,
        }
    }

    /// Party with input `<name>_I` and output `<name>_O`.
    pub fn qubits(name: &str) -> Self {
        Self::new(
            name,
            Some(SystemLabel::new(format!("{}_I", name), 2)),
            Some(SystemLabel::new(format!("{}_O", name), 2)),
        )
    }

    pub fn labels(&self) -> Vec<SystemLabel> {
        self.input.iter().chain(self.output.iter()).cloned().collect()
    }

    pub fn output_dim(&self) -> usize {
        self.output.as_ref().map_or(1, |l| l.dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    op: LabeledOperator,
    parties: Vec<Party>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidityReport {
    pub hermitian_deviation: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub expected_trace: f64,
    pub subspace_residual: f64,
    pub valid: bool,
}

/// Trace-and-replace on a possibly empty label set.
fn replace(w: &LabeledOperator, labels: &[&SystemLabel]) -> Result<LabeledOperator> {
    let names: Vec<&str> = labels.iter().map(|l| l.name.as_str()).collect();
    w.trace_replace(&names)
}

impl ProcessMatrix {
    /// Checks that the party labels cover the operator's systems exactly once.
    pub fn new(op: LabeledOperator, parties: Vec<Party>) -> Result<Self> {
        let mut seen: Vec<&str> = Vec::new();
        let mut pnames: Vec<&str> = Vec::new();
        for p in &parties {
            if pnames.contains(&p.name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate party `{}`", p.name)));
            }
            pnames.push(&p.name);
            for l in p.input.iter().chain(p.output.iter()) {
                let have = op.label(&l.name).ok_or_else(|| Error::UnknownLabel(l.name.clone()))?;
                if have.dim != l.dim {
                    return Err(Error::DimensionMismatch {
                        label: l.name.clone(),
                        left: have.dim,
                        right: l.dim,
                    });
                }
                if seen.contains(&l.name.as_str()) {
                    return Err(Error::LabelCollision(l.name.clone()));
                }
                seen.push(&l.name);
            }
        }
        for s in op.systems() {
            if !seen.contains(&s.name.as_str()) {
                return Err(Error::InvalidArgument(format!("system `{}` belongs to no party", s.name)));
            }
        }
        Ok(Self { op, parties })
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.op
    }

    pub fn parties(&self) -> &[Party] {
        &self.parties
    }

    pub fn party(&self, name: &str) -> Option<&Party> {
        self.parties.iter().find(|p| p.name == name)
    }

    pub fn output_dim_product(&self) -> usize {
        self.parties.iter().map(|p| p.output_dim()).product()
    }

    /// The trace-matched identity.
    pub fn white_noise(&self) -> Result<LabeledOperator> {
        let id = LabeledOperator::identity(self.op.systems().to_vec())?;
        Ok(id.scale(self.op.trace().re / self.op.dim() as f64))
    }

    /// Projection onto the valid-process subspace:
    /// L(W) = W - Q(W) + R_all(W), Q = prod_i (1 - R_{O_i} + R_{I_i O_i}),
    /// where R_X is trace-and-replace on X.
    pub fn project_valid(&self, w: &LabeledOperator) -> Result<LabeledOperator> {
        let mut q = w.clone();
        for p in &self.parties {
            let Some(out) = &p.output else {
                // Absent output: the factor reduces to R_I, or to 1 with no input either.
                if let Some(inp) = &p.input {
                    q = replace(&q, &[inp])?;
                }
                continue;
            };
            let ro = replace(&q, &[out])?;
            let mut io: Vec<&SystemLabel> = p.input.iter().collect();
            io.push(out);
            let rio = replace(&q, &io)?;
            q = q.sub(&ro)?.add(&rio)?;
        }
        let all: Vec<&str> = w.names();
        let rall = w.trace_replace(&all)?;
        w.sub(&q)?.add(&rall)
    }

    pub fn with_op(&self, op: LabeledOperator) -> Result<Self> {
        Self::new(op, self.parties.clone())
    }

    /// Renames parties' systems so that every label is present with dimension 1 when absent.
    pub fn padded(&self) -> Result<Self> {
        let mut op = self.op.clone();
        let mut parties = Vec::with_capacity(self.parties.len());
        for p in &self.parties {
            let input = p.input.clone().unwrap_or_else(|| SystemLabel::new(format!("{}_I", p.name), 1));
            let output = p.output.clone().unwrap_or_else(|| SystemLabel::new(format!("{}_O", p.name), 1));
            for l in [&input, &output] {
                if !op.has(&l.name) {
                    op = op.tensor(&LabeledOperator::identity(vec![l.clone()])?)?;
                }
            }
            parties.push(Party::new(&p.name, Some(input), Some(output)));
        }
        Self::new(op, parties)
    }

    /// Drops dimension-1 labels.
    pub fn unpadded(&self) -> Result<Self> {
        let trivial: Vec<&str> = self.op.systems().iter().filter(|s| s.dim == 1).map(|s| s.name.as_str()).collect();
        let op = self.op.partial_trace(&trivial)?;
        let strip = |l: &Option<SystemLabel>| l.clone().filter(|l| l.dim > 1);
        let parties = self
            .parties
            .iter()
            .map(|p| Party::new(&p.name, strip(&p.input), strip(&p.output)))
            .collect();
        Self::new(op, parties)
    }
}

pub fn validate_process_matrix(w: &ProcessMatrix) -> Result<ValidityReport> {
    let op = w.op();
    let herm = op.hermitian_deviation();
    let min_eig = op.hermitian_part().min_eigenvalue();
    let trace = op.trace().re;
    let expected = w.output_dim_product() as f64;
    let proj = w.project_valid(op)?;
    let residual = op.max_abs_diff(&proj)?;
    let valid = herm <= PROCESS_TOL && min_eig >= -PSD_TOL && (trace - expected).abs() <= PROCESS_TOL && residual <= PROCESS_TOL;
    Ok(ValidityReport {
        hermitian_deviation: herm,
        min_eigenvalue: min_eig,
        trace,
        expected_trace: expected,
        subspace_residual: residual,
        valid,
    })
}

/// Largest residual of the nested conditions for the given order.
pub fn ordered_process_residual(w: &ProcessMatrix, order: &[&str]) -> Result<f64> {
    let mut names: Vec<&str> = w.parties().iter().map(|p| p.name.as_str()).collect();
    let mut sorted = order.to_vec();
    names.sort_unstable();
    sorted.sort_unstable();
    if names != sorted {
        return Err(Error::InvalidArgument(format!("order {:?} is not a permutation of the parties", order)));
    }
    let mut v = w.op().clone();
    let mut worst: f64 = 0.0;
    for name in order.iter().rev() {
        let p = w.party(name).unwrap();
        if let Some(out) = &p.output {
            let r = replace(&v, &[out])?;
            worst = worst.max(v.max_abs_diff(&r)?);
        }
        let io: Vec<&str> = p.input.iter().chain(p.output.iter()).map(|l| l.name.as_str()).collect();
        v = v.partial_trace(&io)?.scale(1.0 / p.output_dim() as f64);
    }
    let last = v.as_scalar().unwrap_or(C64::new(f64::NAN, 0.0));
    worst = worst.max((last - C64::new(1.0, 0.0)).norm());
    Ok(worst)
}

pub fn ordered_process_check(w: &ProcessMatrix, order: &[&str]) -> Result<bool> {
    Ok(ordered_process_residual(w, order)? <= PROCESS_TOL)
}

/// (W + r 1°)/(1 + r) with 1° the trace-matched identity.
pub fn depolarize(w: &ProcessMatrix, r: f64) -> Result<ProcessMatrix> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("noise level must be a finite nonnegative number, got {}", r)));
    }
    let noise = w.white_noise()?;
    let op = w.op().add(&noise.scale(r))?.scale(1.0 / (1.0 + r));
    w.with_op(op)
}
