//! Forward simulation of the network protocols: remote state preparation,
//! heralded correlations, Bell sub-tensors and physical embeddings.

mod embed;
pub mod manifest;
mod pipeline;
mod switch_ndi;

pub use embed::{embed_physical, JunkSpec, PhysicalRealization};
pub use pipeline::{noisy_realization, run_ndi_pipeline, LinkBellReport, NoiseConfig, PipelineConfig, PipelineReport, WitnessBundle};
pub use switch_ndi::{drf_slice, emily_measurement, fiona_two_settings, phil_instrument, simulate_p2f_phil_emily, switch_ndi_scenario, PHIL_STAR};

use std::collections::BTreeMap;

use crate::certify::{Axis, CorrelationTensor, StateSet};
use crate::dpovm::{induce_dpovm, Dpovm};
use crate::error::{Error, Result};
use crate::process::{Instrument, ProcessMatrix};
use crate::tensor_core::{LabeledOperator, MeasurementFamily, SystemLabel, PSD_TOL};

/// A preparer sharing `shared` with one party and measuring its half.
#[derive(Clone, Debug)]
pub struct Link {
    pub preparer: String,
    pub party: String,
    pub measurement: MeasurementFamily,
    pub shared: LabeledOperator,
    /// Preparer settings used for the Bell test.
    pub bell_settings: Vec<usize>,
    /// Party settings used for the Bell test.
    pub party_bell_settings: Vec<usize>,
}

impl Link {
    /// Labels of the party's half of the shared state.
    pub fn party_labels(&self) -> Vec<SystemLabel> {
        self.shared.systems().iter().filter(|l| l.name != self.measurement.label().name).cloned().collect()
    }
}

#[derive(Clone, Debug)]
pub struct NetworkScenario {
    pub process: ProcessMatrix,
    pub instruments: BTreeMap<String, Instrument>,
    pub links: Vec<Link>,
    /// Party name to the index of its `⋆` setting.
    pub star: BTreeMap<String, usize>,
}

#[derive(Clone, Debug)]
pub struct RemoteState {
    pub probability: f64,
    pub state: LabeledOperator,
}

fn check_density(rho: &LabeledOperator) -> Result<()> {
    if !rho.is_hermitian(1e-10) {
        return Err(Error::NotHermitian(rho.hermitian_deviation()));
    }
    if rho.min_eigenvalue() < -PSD_TOL || (rho.trace().re - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("shared state is not a density operator".into()));
    }
    Ok(())
}

/// `P(c|z)·ρ_{c|z} = M_{c|z} * shared`, indexed `[z][c]`.
pub fn remote_states(meas: &MeasurementFamily, shared: &LabeledOperator) -> Result<Vec<Vec<RemoteState>>> {
    if !shared.has(&meas.label().name) {
        return Err(Error::UnknownLabel(meas.label().name.clone()));
    }
    check_density(shared)?;
    let mut out = Vec::with_capacity(meas.setting_count());
    for z in 0..meas.setting_count() {
        let mut row = Vec::with_capacity(meas.outcome_count());
        for c in 0..meas.outcome_count() {
            let sigma = meas.element(z, c).link(shared)?;
            let p = sigma.trace().re;
            let state = if p > 1e-15 { sigma.scale(1.0 / p) } else { sigma };
            row.push(RemoteState { probability: p, state });
        }
        out.push(row);
    }
    Ok(out)
}

/// Normalized heralded states (`c = 0`) of a link, one per preparer setting.
pub fn heralded_states(link: &Link) -> Result<StateSet> {
    let rs = remote_states(&link.measurement, &link.shared)?;
    Ok(StateSet {
        labels: link.party_labels(),
        states: rs.into_iter().map(|row| row.into_iter().next().unwrap().state).collect(),
    })
}

/// `Tr(E σᵀ)` with σ permuted to E's labels.
fn born(e: &LabeledOperator, sigma: &LabeledOperator) -> f64 {
    e.matrix().iter().zip(sigma.matrix().iter()).map(|(a, b)| (a * b).re).sum()
}

/// Values of `P(c⃗, a⃗ | z⃗, x⃗) = E_{a⃗|x⃗} * ⊗_j σ_j[z_j][c_j]`, sources first.
fn contract(e: &Dpovm, sources: &[Vec<Vec<LabeledOperator>>]) -> Result<Vec<f64>> {
    let order: Vec<&str> = e.labels().iter().map(|l| l.name.as_str()).collect();
    let settings: Vec<usize> = sources.iter().map(|s| s.len()).collect();
    let outs: Vec<usize> = sources.iter().map(|s| s[0].len()).collect();
    let n_set: usize = settings.iter().product();
    let n_src_out: usize = outs.iter().product();
    let split = |mut i: usize, radices: &[usize]| {
        let mut d = vec![0; radices.len()];
        for k in (0..radices.len()).rev() {
            d[k] = i % radices[k];
            i /= radices[k];
        }
        d
    };
    let mut products = Vec::with_capacity(n_set * n_src_out);
    for zi in 0..n_set {
        let zs = split(zi, &settings);
        for ci in 0..n_src_out {
            let cs = split(ci, &outs);
            let mut prod = LabeledOperator::scalar(1.0.into());
            for (j, src) in sources.iter().enumerate() {
                prod = prod.tensor(&src[zs[j]][cs[j]])?;
            }
            products.push(prod.permuted(&order)?);
        }
    }
    let (nx, na) = (e.input_count(), e.outcome_count());
    let mut values = Vec::with_capacity(n_set * nx * n_src_out * na);
    for zi in 0..n_set {
        for x in 0..nx {
            for ci in 0..n_src_out {
                let sigma = &products[zi * n_src_out + ci];
                for a in 0..na {
                    values.push(born(&e.elements()[x * na + a], sigma));
                }
            }
        }
    }
    Ok(values)
}

fn party_axes(e: &Dpovm, star: &BTreeMap<String, usize>) -> (Vec<Axis>, Vec<Axis>) {
    let inputs = e
        .parties()
        .iter()
        .map(|p| {
            let a = Axis::new(&p.name, p.classical_inputs);
            match star.get(&p.name) {
                Some(&s) => a.with_star(s),
                None => a,
            }
        })
        .collect();
    let outcomes = e.parties().iter().map(|p| Axis::new(&p.name, p.outcomes)).collect();
    (inputs, outcomes)
}

fn clamp(mut values: Vec<f64>) -> Vec<f64> {
    for v in &mut values {
        if *v < 0.0 && *v > -1e-13 {
            *v = 0.0;
        }
    }
    values
}

/// Correlations `P(a⃗ | k⃗, x⃗) = E_{a⃗|x⃗} * ⊗_j ρ_{j,k_j}` with the quantum
/// inputs drawn from the state sets (one per quantum party, in process order).
pub fn simulate_sdiqi(w: &ProcessMatrix, instruments: &BTreeMap<String, Instrument>, sets: &[StateSet]) -> Result<CorrelationTensor> {
    let e = induce_dpovm(w, instruments)?;
    let quantum: Vec<_> = e.parties().iter().filter(|p| !p.quantum_inputs.is_empty()).collect();
    if quantum.len() != sets.len() {
        return Err(Error::Shape(format!("{} state sets for {} parties with quantum inputs", sets.len(), quantum.len())));
    }
    for (p, s) in quantum.iter().zip(sets) {
        if p.quantum_inputs != s.labels {
            return Err(Error::Shape(format!("state set does not match the quantum inputs of `{}`", p.name)));
        }
    }
    let sources: Vec<Vec<Vec<LabeledOperator>>> = sets.iter().map(|s| s.states.iter().map(|r| vec![r.clone()]).collect()).collect();
    let (px, pa) = party_axes(&e, &BTreeMap::new());
    let mut inputs: Vec<Axis> = quantum.iter().zip(sets).map(|(p, s)| Axis::new(&format!("{}'", p.name), s.states.len())).collect();
    inputs.extend(px);
    CorrelationTensor::new(inputs, pa, clamp(contract(&e, &sources)?))
}

impl NetworkScenario {
    fn validate(&self) -> Result<Dpovm> {
        let e = induce_dpovm(&self.process, &self.instruments)?;
        for p in e.parties() {
            if p.quantum_inputs.is_empty() {
                continue;
            }
            let links: Vec<&Link> = self.links.iter().filter(|l| l.party == p.name).collect();
            if links.len() != 1 {
                return Err(Error::InvalidArgument(format!("party `{}` needs exactly one link, has {}", p.name, links.len())));
            }
            if links[0].party_labels() != p.quantum_inputs {
                return Err(Error::Shape(format!("link into `{}` does not deliver its quantum inputs", p.name)));
            }
        }
        if self.links.iter().any(|l| !e.parties().iter().any(|p| p.name == l.party && !p.quantum_inputs.is_empty())) {
            return Err(Error::InvalidArgument("link into a party without quantum inputs".into()));
        }
        for (name, &s) in &self.star {
            let p = e
                .parties()
                .iter()
                .find(|p| &p.name == name)
                .ok_or_else(|| Error::InvalidArgument(format!("star for unknown party `{}`", name)))?;
            if s >= p.classical_inputs {
                return Err(Error::InvalidArgument(format!("star setting {} out of range for `{}`", s, name)));
            }
        }
        Ok(e)
    }

    /// Links in the process's party order.
    fn ordered_links(&self, e: &Dpovm) -> Vec<&Link> {
        e.parties()
            .iter()
            .filter_map(|p| self.links.iter().find(|l| l.party == p.name))
            .collect()
    }

    /// Instruments with every starred party restricted to its `⋆` setting.
    pub fn star_instruments(&self) -> Result<BTreeMap<String, Instrument>> {
        let mut inst = self.instruments.clone();
        for (name, &s) in &self.star {
            let i = self
                .instruments
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("star for unknown party `{}`", name)))?;
            if s >= i.classical_inputs() {
                return Err(Error::InvalidArgument(format!("star setting {} out of range for `{}`", s, name)));
            }
            let fixed = Instrument::new(i.party(), i.quantum_inputs().to_vec(), i.input().cloned(), i.output().cloned(), vec![i.elements()[s].clone()])?;
            inst.insert(name.clone(), fixed);
        }
        Ok(inst)
    }

    /// D-POVM induced with every starred party restricted to its `⋆` setting.
    pub fn star_dpovm(&self) -> Result<Dpovm> {
        induce_dpovm(&self.process, &self.star_instruments()?)
    }

    /// Every linked party has an in-range `⋆` setting.
    pub fn check_ndi(&self) -> Result<()> {
        for l in &self.links {
            if !self.star.contains_key(&l.party) {
                return Err(Error::InvalidArgument(format!("party `{}` has no star setting", l.party)));
            }
        }
        self.validate().map(|_| ())
    }

    /// Heralded reference states per link, in process order.
    pub fn state_sets(&self) -> Result<Vec<StateSet>> {
        let e = self.validate()?;
        self.ordered_links(&e).into_iter().map(heralded_states).collect()
    }
}

/// Full network correlations. Inputs: preparer settings then party inputs;
/// outcomes: preparer outcomes (heralding) then party outcomes.
pub fn simulate_network(scn: &NetworkScenario) -> Result<CorrelationTensor> {
    let e = scn.validate()?;
    let links = scn.ordered_links(&e);
    let mut sources = Vec::with_capacity(links.len());
    for l in &links {
        check_density(&l.shared)?;
        l.measurement.validate()?;
        let rows = (0..l.measurement.setting_count())
            .map(|z| (0..l.measurement.outcome_count()).map(|c| l.measurement.element(z, c).link(&l.shared)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        sources.push(rows);
    }
    let (px, pa) = party_axes(&e, &scn.star);
    let mut inputs: Vec<Axis> = links.iter().map(|l| Axis::new(&l.preparer, l.measurement.setting_count())).collect();
    let mut outcomes: Vec<Axis> = links.iter().map(|l| Axis::new(&l.preparer, l.measurement.outcome_count()).heralding()).collect();
    inputs.extend(px);
    outcomes.extend(pa);
    // `contract` enumerates (settings, x, source outcomes, a), which is the
    // input-major layout of these axes.
    CorrelationTensor::new(inputs, outcomes, clamp(contract(&e, &sources)?))
}

/// Network correlations without self-testing rounds.
pub fn simulate_nsdi_qi(scn: &NetworkScenario) -> Result<CorrelationTensor> {
    simulate_network(scn)
}

/// Network correlations with `⋆` settings; every linked party must have one.
pub fn simulate_ndi(scn: &NetworkScenario) -> Result<CorrelationTensor> {
    scn.check_ndi()?;
    simulate_network(scn)
}

/// `P(c, a | z, x)` for one link's Bell test, with every other input fixed
/// at 0 and every other outcome summed out.
pub fn bell_subtensor(p: &CorrelationTensor, link: &Link) -> Result<CorrelationTensor> {
    let mut t = p.select_input(&link.preparer, &link.bell_settings)?;
    t = t.select_input(&link.party, &link.party_bell_settings)?;
    for a in p.inputs() {
        if a.name != link.preparer && a.name != link.party {
            t = t.fix_input(&a.name, 0)?;
        }
    }
    t = t.marginal(&[&link.preparer, &link.party])?;
    if t.inputs()[0].name != link.preparer {
        let s = t;
        let (a, b) = (s.inputs()[0].clone(), s.inputs()[1].clone());
        t = CorrelationTensor::from_fn(vec![b, a], s.outcomes().to_vec(), |x, o| s.get(&[x[1], x[0]], o))?;
    }
    t.with_axis_names(&["z", "x"], &["c", "a"])
}
