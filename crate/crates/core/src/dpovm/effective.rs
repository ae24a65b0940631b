use super::{Dpovm, DpovmParty};
use crate::error::{Error, Result};
use crate::tensor_core::{CMat, LabeledOperator, SystemLabel, C64};

/// Local isometry `V: physical → reference ⊗ junk` for one party, with the
/// two junk operators weighting the plain and the transposed branch.
#[derive(Clone, Debug)]
pub struct PartyEmbedding {
    pub party: String,
    pub physical: Vec<SystemLabel>,
    pub reference: SystemLabel,
    pub junk: Vec<SystemLabel>,
    pub isometry: CMat,
    pub xi: [LabeledOperator; 2],
}

impl PartyEmbedding {
    /// Embedding that only renames `physical` to `reference`.
    pub fn identity(party: &str, physical: SystemLabel, reference: SystemLabel) -> Result<Self> {
        if physical.dim != reference.dim {
            return Err(Error::DimensionMismatch {
                label: reference.name.clone(),
                left: physical.dim,
                right: reference.dim,
            });
        }
        let d = physical.dim;
        Ok(Self {
            party: party.to_string(),
            physical: vec![physical],
            reference,
            junk: vec![],
            isometry: CMat::identity(d, d),
            xi: [LabeledOperator::scalar(C64::new(1.0, 0.0)), LabeledOperator::scalar(C64::new(0.0, 0.0))],
        })
    }

    fn check(&self) -> Result<()> {
        let dp: usize = self.physical.iter().map(|l| l.dim).product();
        let dj: usize = self.junk.iter().map(|l| l.dim).product();
        let (r, c) = self.isometry.shape();
        if r != self.reference.dim * dj || c != dp {
            return Err(Error::Shape(format!(
                "isometry for {} is {}x{}, expected {}x{}",
                self.party,
                r,
                c,
                self.reference.dim * dj,
                dp
            )));
        }
        let vv = self.isometry.adjoint() * &self.isometry;
        if (vv - CMat::identity(dp, dp)).norm() > 1e-8 {
            return Err(Error::Precondition(format!("map for {} is not an isometry", self.party)));
        }
        for x in &self.xi {
            let mut want: Vec<&str> = self.junk.iter().map(|l| l.name.as_str()).collect();
            let mut got = x.names();
            want.sort_unstable();
            got.sort_unstable();
            if want != got {
                return Err(Error::Shape(format!("junk operator for {} must act on the junk systems", self.party)));
            }
        }
        Ok(())
    }

    /// Choi operator of `V†` on (reference, junk, physical).
    fn adjoint_choi(&self) -> Result<LabeledOperator> {
        let mut labels = vec![self.reference.clone()];
        labels.extend(self.junk.iter().cloned());
        labels.extend(self.physical.iter().cloned());
        let (rows, cols) = self.isometry.shape();
        let mut ket = vec![C64::new(0.0, 0.0); rows * cols];
        for i in 0..rows {
            for m in 0..cols {
                ket[i * cols + m] = self.isometry[(i, m)].conj();
            }
        }
        LabeledOperator::from_ket(labels, &ket)
    }

    /// `Σ_k (D ⋆ ξ_k)^{T_ref^k}` on (reference, physical).
    pub fn transfer(&self) -> Result<LabeledOperator> {
        self.check()?;
        let d = self.adjoint_choi()?;
        let plain = d.link(&self.xi[0])?;
        let flipped = d.link(&self.xi[1])?.partial_transpose(&[self.reference.name.as_str()])?;
        plain.add(&flipped)
    }
}

/// Pulls a physical D-POVM back to the reference systems through the local
/// embeddings. Parties without an embedding must have no quantum inputs.
pub fn effective_dpovm(e: &Dpovm, embeddings: &[PartyEmbedding]) -> Result<Dpovm> {
    let mut parties: Vec<DpovmParty> = e.parties().to_vec();
    let mut transfers = Vec::new();
    for emb in embeddings {
        let p = parties
            .iter_mut()
            .find(|p| p.name == emb.party)
            .ok_or_else(|| Error::InvalidArgument(format!("no party `{}`", emb.party)))?;
        let mut have: Vec<&str> = p.quantum_inputs.iter().map(|l| l.name.as_str()).collect();
        let mut want: Vec<&str> = emb.physical.iter().map(|l| l.name.as_str()).collect();
        have.sort_unstable();
        want.sort_unstable();
        if have != want {
            return Err(Error::Shape(format!("embedding for `{}` does not cover its quantum inputs", emb.party)));
        }
        p.quantum_inputs = vec![emb.reference.clone()];
        transfers.push(emb.transfer()?);
    }
    let unmapped: Vec<&str> = e
        .parties()
        .iter()
        .filter(|p| !p.quantum_inputs.is_empty() && !embeddings.iter().any(|m| m.party == p.name))
        .map(|p| p.name.as_str())
        .collect();
    if !unmapped.is_empty() {
        return Err(Error::Precondition(format!("parties without embedding: {}", unmapped.join(", "))));
    }
    let elements = e
        .elements()
        .iter()
        .map(|el| transfers.iter().try_fold(el.clone(), |acc, g| acc.link(g)))
        .collect::<Result<Vec<_>>>()?;
    Dpovm::new(parties, elements)
}
