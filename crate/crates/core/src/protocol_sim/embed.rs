use serde::{Deserialize, Serialize};

use super::{Link, NetworkScenario};
use crate::dpovm::PartyEmbedding;
use crate::error::{Error, Result};
use crate::process::Instrument;
use crate::tensor_core::{eigh, CMat, LabeledOperator, MeasurementFamily, SystemLabel, C64, PSD_TOL};

/// Junk and flag structure of one link's physical realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JunkSpec {
    pub junk_dim: usize,
    /// Weights of the plain and the transposed branch.
    pub flag_weights: [f64; 2],
    /// Vector distance `‖ψ_phys − ψ_embedded‖` of the perturbed shared state.
    pub perturbation: f64,
}

impl Default for JunkSpec {
    fn default() -> Self {
        Self {
            junk_dim: 1,
            flag_weights: [1.0, 0.0],
            perturbation: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhysicalRealization {
    pub reference: NetworkScenario,
    pub physical: NetworkScenario,
    /// Party-side embeddings, one per link in link order.
    pub embeddings: Vec<PartyEmbedding>,
    pub specs: Vec<JunkSpec>,
    /// Trace distance between the physical and the unperturbed embedded state, per link.
    pub trace_distance: Vec<f64>,
}

fn physical_name(name: &str) -> String {
    format!("{}~", name)
}

/// Collapses `parts` (in order) into one label placed first.
fn merge(op: &LabeledOperator, parts: &[&str], into: &str) -> Result<LabeledOperator> {
    let rest: Vec<&str> = op.names().into_iter().filter(|n| !parts.contains(n)).collect();
    let mut order = parts.to_vec();
    order.extend(&rest);
    let p = op.permuted(&order)?;
    let dim: usize = parts.iter().map(|n| p.label(n).unwrap().dim).product();
    let mut systems = vec![SystemLabel::new(into, dim)];
    systems.extend(rest.iter().map(|n| p.label(n).unwrap().clone()));
    LabeledOperator::new(systems, p.into_matrix())
}

fn ket(systems: Vec<SystemLabel>, amps: Vec<C64>) -> KetOp {
    KetOp { systems, amps }
}

struct KetOp {
    systems: Vec<SystemLabel>,
    amps: Vec<C64>,
}

impl KetOp {
    fn kron(&self, o: &KetOp) -> KetOp {
        let mut amps = Vec::with_capacity(self.amps.len() * o.amps.len());
        for a in &self.amps {
            for b in &o.amps {
                amps.push(a * b);
            }
        }
        let mut systems = self.systems.clone();
        systems.extend(o.systems.iter().cloned());
        KetOp { systems, amps }
    }
}

/// Leading eigenvector of a rank-one density operator.
fn pure_ket(rho: &LabeledOperator) -> Result<Vec<C64>> {
    let (vals, vecs) = eigh(rho.matrix());
    let top = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    if (vals[top] - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition("embedding needs a pure shared state".into()));
    }
    Ok(vecs.column(top).iter().cloned().collect())
}

/// A unit vector orthogonal to `psi`, from the last basis vector with a nonzero residual.
fn orthogonal_direction(psi: &[C64]) -> Vec<C64> {
    for k in (0..psi.len()).rev() {
        let overlap = psi[k].conj();
        let mut v: Vec<C64> = psi.iter().map(|p| -p * overlap).collect();
        v[k] += C64::new(1.0, 0.0);
        let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
    unreachable!("a vector of dimension > 1 has an orthogonal complement")
}

fn junk_ket(pre: &SystemLabel, party: &SystemLabel, k: usize) -> KetOp {
    let d = pre.dim;
    let mut amps = vec![C64::new(0.0, 0.0); d * d];
    if k == 0 || d == 1 {
        amps[0] = C64::new(1.0, 0.0);
    } else {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        amps[1] = C64::new(s, 0.0);
        amps[d] = C64::new(s, 0.0);
    }
    ket(vec![pre.clone(), party.clone()], amps)
}

fn flag(label: &SystemLabel, k: usize) -> Result<LabeledOperator> {
    LabeledOperator::basis_projector(label.clone(), k)
}

struct LinkEmbedding {
    link: Link,
    instrument: Instrument,
    embedding: PartyEmbedding,
    trace_distance: f64,
}

fn embed_link(link: &Link, inst: &Instrument, spec: &JunkSpec) -> Result<LinkEmbedding> {
    let w = spec.flag_weights;
    if w.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (w[0] + w[1] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("flag weights {:?} must be nonnegative and sum to 1", w)));
    }
    if spec.junk_dim == 0 || !(spec.perturbation >= 0.0 && spec.perturbation <= 2.0) {
        return Err(Error::InvalidArgument("junk_dim must be positive and perturbation in [0, 2]".into()));
    }
    let pre = link.measurement.label().clone();
    let party_labels = link.party_labels();
    if party_labels.len() != 1 {
        return Err(Error::Shape(format!("link into `{}` must deliver a single system", link.party)));
    }
    let reference = party_labels[0].clone();
    let (pre_phys, party_phys) = (physical_name(&pre.name), physical_name(&reference.name));
    let jl = |n: &str| SystemLabel::new(format!("{}j", n), spec.junk_dim);
    let fl = |n: &str| SystemLabel::new(format!("{}f", n), 2);
    let (pre_j, pre_f, par_j, par_f) = (jl(&pre_phys), fl(&pre_phys), jl(&party_phys), fl(&party_phys));

    // Shared state: Σ_k √w_k |φ_α⟩|χ_k⟩|kk⟩.
    let shared = link.shared.permuted(&[pre.name.as_str(), reference.name.as_str()])?;
    let psi = pure_ket(&shared)?;
    let alpha = 2.0 * (spec.perturbation / 2.0).asin();
    let perp = orthogonal_direction(&psi);
    let phi: Vec<C64> = psi.iter().zip(&perp).map(|(a, b)| a * alpha.cos() + b * alpha.sin()).collect();
    let phi = ket(shared.systems().to_vec(), phi);
    let mut total = vec![C64::new(0.0, 0.0); 0];
    let mut systems = vec![];
    let mut unperturbed = vec![];
    for k in 0..2 {
        let f = ket(vec![pre_f.clone(), par_f.clone()], (0..4).map(|i| C64::new(if i == 3 * k { 1.0 } else { 0.0 }, 0.0)).collect());
        let branch = |base: &KetOp| base.kron(&junk_ket(&pre_j, &par_j, k)).kron(&f);
        let (b, u) = (branch(&phi), branch(&ket(shared.systems().to_vec(), psi.clone())));
        if total.is_empty() {
            total = vec![C64::new(0.0, 0.0); b.amps.len()];
            unperturbed = total.clone();
            systems = b.systems.clone();
        }
        let s = w[k].sqrt();
        for i in 0..total.len() {
            total[i] += b.amps[i] * s;
            unperturbed[i] += u.amps[i] * s;
        }
    }
    let overlap: C64 = unperturbed.iter().zip(&total).map(|(a, b)| a.conj() * b).sum();
    let trace_distance = (1.0 - overlap.norm_sqr()).max(0.0).sqrt();
    let rho = LabeledOperator::from_ket(systems, &total)?;
    let rho = merge(&rho, &[pre.name.as_str(), &pre_j.name, &pre_f.name], &pre_phys)?;
    let rho = merge(&rho, &[reference.name.as_str(), &par_j.name, &par_f.name], &party_phys)?;

    // Preparer: M on flag 0, Mᵀ on flag 1.
    let id_j = LabeledOperator::identity(vec![pre_j.clone()])?;
    let mut rows = Vec::with_capacity(link.measurement.setting_count());
    for z in 0..link.measurement.setting_count() {
        let mut row = Vec::with_capacity(link.measurement.outcome_count());
        for c in 0..link.measurement.outcome_count() {
            let m = link.measurement.element(z, c);
            let plain = m.tensor(&id_j)?.tensor(&flag(&pre_f, 0)?)?;
            let flipped = m.transpose().tensor(&id_j)?.tensor(&flag(&pre_f, 1)?)?;
            row.push(merge(&plain.add(&flipped)?, &[pre.name.as_str(), &pre_j.name, &pre_f.name], &pre_phys)?);
        }
        rows.push(row);
    }
    let measurement = MeasurementFamily::new(SystemLabel::new(&pre_phys, pre.dim * spec.junk_dim * 2), rows)?;

    // Party: partial transpose on flag 1 where that stays positive, flag-blind otherwise.
    let id_pj = LabeledOperator::identity(vec![par_j.clone()])?;
    let id_pf = LabeledOperator::identity(vec![par_f.clone()])?;
    let parts = [reference.name.as_str(), par_j.name.as_str(), par_f.name.as_str()];
    let mut elements = Vec::with_capacity(inst.classical_inputs());
    for setting in inst.elements() {
        let flipped: Vec<LabeledOperator> = setting
            .iter()
            .map(|m| m.partial_transpose(&[reference.name.as_str()]))
            .collect::<Result<_>>()?;
        let aware = flipped.iter().all(|m| m.min_eigenvalue() >= -PSD_TOL);
        let mut row = Vec::with_capacity(setting.len());
        for (m, mt) in setting.iter().zip(&flipped) {
            let op = if aware {
                m.tensor(&id_pj)?.tensor(&flag(&par_f, 0)?)?.add(&mt.tensor(&id_pj)?.tensor(&flag(&par_f, 1)?)?)?
            } else {
                m.tensor(&id_pj)?.tensor(&id_pf)?
            };
            row.push(merge(&op, &parts, &party_phys)?);
        }
        elements.push(row);
    }
    let party_label = SystemLabel::new(&party_phys, reference.dim * spec.junk_dim * 2);
    let quantum: Vec<SystemLabel> = inst
        .quantum_inputs()
        .iter()
        .map(|l| if l.name == reference.name { party_label.clone() } else { l.clone() })
        .collect();
    let instrument = Instrument::new(inst.party(), quantum, inst.input().cloned(), inst.output().cloned(), elements)?;

    // ξ_k = w_k · Tr_preparer(χ_k) ⊗ |k⟩⟨k|.
    let mut xi = Vec::with_capacity(2);
    for k in 0..2 {
        let chi = junk_ket(&pre_j, &par_j, k);
        let tau = LabeledOperator::from_ket(chi.systems, &chi.amps)?.partial_trace(&[pre_j.name.as_str()])?;
        xi.push(tau.tensor(&flag(&par_f, k)?)?.scale(w[k]));
    }
    let d = party_label.dim;
    let embedding = PartyEmbedding {
        party: link.party.clone(),
        physical: vec![party_label.clone()],
        reference,
        junk: vec![par_j, par_f],
        isometry: CMat::identity(d, d),
        xi: [xi[0].clone(), xi[1].clone()],
    };
    Ok(LinkEmbedding {
        link: Link {
            preparer: link.preparer.clone(),
            party: link.party.clone(),
            measurement,
            shared: rho,
            bell_settings: link.bell_settings.clone(),
            party_bell_settings: link.party_bell_settings.clone(),
        },
        instrument,
        embedding,
        trace_distance,
    })
}

/// Embeds each link of a reference scenario into a physical one with junk,
/// flags selecting a plain or transposed branch, and an optional
/// perturbation of the shared state. Reference shared states must be pure.
pub fn embed_physical(reference: &NetworkScenario, specs: &[JunkSpec]) -> Result<PhysicalRealization> {
    if specs.len() != reference.links.len() {
        return Err(Error::Shape(format!("{} junk specs for {} links", specs.len(), reference.links.len())));
    }
    let mut physical = reference.clone();
    physical.links.clear();
    let mut embeddings = Vec::with_capacity(specs.len());
    let mut trace_distance = Vec::with_capacity(specs.len());
    for (link, spec) in reference.links.iter().zip(specs) {
        let inst = reference
            .instruments
            .get(&link.party)
            .ok_or_else(|| Error::InvalidArgument(format!("no instrument for `{}`", link.party)))?;
        let e = embed_link(link, inst, spec)?;
        physical.instruments.insert(link.party.clone(), e.instrument);
        physical.links.push(e.link);
        embeddings.push(e.embedding);
        trace_distance.push(e.trace_distance);
    }
    Ok(PhysicalRealization {
        reference: reference.clone(),
        physical,
        embeddings,
        specs: specs.to_vec(),
        trace_distance,
    })
}
