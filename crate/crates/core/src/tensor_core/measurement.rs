use serde::{Deserialize, Serialize};

use super::{pauli, CMat, LabeledOperator, SystemLabel, C64, EXACT_TOL, PSD_TOL};
use crate::error::{Error, Result};

/// Setting-indexed POVMs on one system, stored as Choi elements
/// (the transpose of the usual measurement operators).
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementFamily {
    label: SystemLabel,
    elements: Vec<Vec<LabeledOperator>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyReport {
    pub min_eigenvalue: f64,
    pub completeness_error: f64,
}

impl MeasurementFamily {
    /// `elements[setting][outcome]`, all on `label`.
    pub fn new(label: SystemLabel, elements: Vec<Vec<LabeledOperator>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidArgument("measurement family needs at least one setting".into()));
        }
        let outcomes = elements[0].len();
        for (s, row) in elements.iter().enumerate() {
            if row.len() != outcomes || outcomes == 0 {
                return Err(Error::Shape(format!("setting {} has {} outcomes, expected {}", s, row.len(), outcomes)));
            }
            for e in row {
                if e.systems() != std::slice::from_ref(&label) {
                    return Err(Error::Shape(format!("element on {:?} but family label is {}", e.names(), label)));
                }
            }
        }
        Ok(Self { label, elements })
    }

    pub fn label(&self) -> &SystemLabel {
        &self.label
    }

    pub fn setting_count(&self) -> usize {
        self.elements.len()
    }

    pub fn outcome_count(&self) -> usize {
        self.elements[0].len()
    }

    pub fn element(&self, setting: usize, outcome: usize) -> &LabeledOperator {
        &self.elements[setting][outcome]
    }

    pub fn setting(&self, setting: usize) -> &[LabeledOperator] {
        &self.elements[setting]
    }

    pub fn relabel(&self, name: &str) -> Result<Self> {
        let elements = self
            .elements
            .iter()
            .map(|row| row.iter().map(|e| e.relabel(&self.label.name, name)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            label: SystemLabel::new(name, self.label.dim),
            elements,
        })
    }

    /// Appends copies of the given settings with their outcomes listed in reverse.
    pub fn with_relabelled_copies(&self, settings: &[usize]) -> Result<Self> {
        let mut elements = self.elements.clone();
        for &s in settings {
            let row = self.elements.get(s).ok_or_else(|| Error::InvalidArgument(format!("no setting {}", s)))?;
            elements.push(row.iter().rev().cloned().collect());
        }
        Self::new(self.label.clone(), elements)
    }

    pub fn report(&self) -> FamilyReport {
        let d = self.label.dim;
        let mut min_eig = f64::INFINITY;
        let mut comp: f64 = 0.0;
        for row in &self.elements {
            let mut sum = CMat::zeros(d, d);
            for e in row {
                min_eig = min_eig.min(e.min_eigenvalue());
                sum += e.matrix();
            }
            let dev = (sum - CMat::identity(d, d)).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            comp = comp.max(dev);
        }
        FamilyReport {
            min_eigenvalue: min_eig,
            completeness_error: comp,
        }
    }

    /// PSD within `-1e-9` and complete within `1e-10`.
    pub fn validate(&self) -> Result<()> {
        let r = self.report();
        if r.min_eigenvalue < -PSD_TOL {
            return Err(Error::InvalidArgument(format!("element with eigenvalue {:.3e}", r.min_eigenvalue)));
        }
        if r.completeness_error > 1e-10 {
            return Err(Error::InvalidArgument(format!("completeness violated by {:.3e}", r.completeness_error)));
        }
        Ok(())
    }

    pub fn is_exactly_complete(&self) -> bool {
        self.report().completeness_error <= EXACT_TOL
    }
}

/// Tomographically complete projective measurements on `m` qubits.
///
/// Settings enumerate `m`-fold products of Z, X, Y (first qubit most
/// significant); outcome bits give the eigenvalue signs. Setting 0 outcome c
/// for `m = 1` has Choi element `((1 + (-1)^c Z)/2)^T`.
pub fn pauli_tomographic_set(m: usize, name: &str) -> Result<MeasurementFamily> {
    if m < 1 {
        return Err(Error::InvalidArgument("pauli_tomographic_set needs m >= 1".into()));
    }
    let d = 1usize << m;
    let settings = 3usize.pow(m as u32);
    let label = SystemLabel::new(name, d);
    let id = CMat::identity(2, 2);
    let mut elements = Vec::with_capacity(settings);
    for s in 0..settings {
        let mut axes = vec![0usize; m];
        let mut rest = s;
        for k in (0..m).rev() {
            axes[k] = rest % 3;
            rest /= 3;
        }
        let mut row = Vec::with_capacity(d);
        for c in 0..d {
            let mut op = CMat::identity(1, 1);
            for (k, &axis) in axes.iter().enumerate() {
                let bit = (c >> (m - 1 - k)) & 1;
                let sign = if bit == 0 { 1.0 } else { -1.0 };
                let proj = (&id + pauli(axis) * C64::new(sign, 0.0)) * C64::new(0.5, 0.0);
                op = op.kronecker(&proj.transpose());
            }
            row.push(LabeledOperator::new(vec![label.clone()], op)?);
        }
        elements.push(row);
    }
    MeasurementFamily::new(label, elements)
}
