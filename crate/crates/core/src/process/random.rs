//! Seeded random instances: states, channels, instruments and processes.

use rand::Rng;

use super::{Instrument, Party, ProcessMatrix};
use crate::error::{Error, Result};
use crate::tensor_core::{eigh, CMat, LabeledOperator, SystemLabel, C64};

fn ginibre(d: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(d, d, |_, _| {
        let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen());
        let r = (-2.0 * u1.ln()).sqrt();
        let t = std::f64::consts::TAU * u2;
        C64::new(r * t.cos(), r * t.sin()) * std::f64::consts::FRAC_1_SQRT_2
    })
}

fn random_positive(systems: &[SystemLabel], rng: &mut impl Rng) -> Result<LabeledOperator> {
    let d: usize = systems.iter().map(|s| s.dim).product();
    let g = ginibre(d, rng);
    LabeledOperator::new(systems.to_vec(), &g * g.adjoint())
}

fn inverse_sqrt(m: &CMat) -> Result<CMat> {
    let (vals, vecs) = eigh(m);
    if vals.first().copied().unwrap_or(1.0) <= 1e-12 {
        return Err(Error::Precondition("normalizing operator is singular".into()));
    }
    let d = m.nrows();
    let diag = CMat::from_fn(d, d, |i, j| if i == j { C64::new(1.0 / vals[i].sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
    Ok(&vecs * diag * vecs.adjoint())
}

/// Density operator drawn from the Hilbert-Schmidt measure.
pub fn random_state(systems: Vec<SystemLabel>, rng: &mut impl Rng) -> Result<LabeledOperator> {
    let p = random_positive(&systems, rng)?;
    let t = p.trace().re;
    Ok(p.scale(1.0 / t))
}

/// Normalizes positive elements on `rest ⊗ out` so that `Σ Tr_out = 1_rest`.
fn trace_normalize(elements: Vec<LabeledOperator>, out: &[SystemLabel]) -> Result<Vec<LabeledOperator>> {
    let out_names: Vec<&str> = out.iter().map(|l| l.name.as_str()).collect();
    let mut sum = elements[0].partial_trace(&out_names)?;
    for e in &elements[1..] {
        sum = sum.add(&e.partial_trace(&out_names)?)?;
    }
    let k = LabeledOperator::new(sum.systems().to_vec(), inverse_sqrt(sum.matrix())?)?;
    let k_full = if out.is_empty() { k } else { k.tensor(&LabeledOperator::identity(out.to_vec())?)? };
    let order: Vec<&str> = elements[0].names();
    let k_full = k_full.permuted(&order)?;
    elements
        .iter()
        .map(|e| {
            let m = k_full.matrix() * e.matrix() * k_full.matrix();
            LabeledOperator::new(e.systems().to_vec(), (&m + m.adjoint()) * C64::new(0.5, 0.0))
        })
        .collect()
}

/// Choi matrix of a random channel from `inputs` to `outputs`.
pub fn random_channel(inputs: Vec<SystemLabel>, outputs: Vec<SystemLabel>, rng: &mut impl Rng) -> Result<LabeledOperator> {
    if inputs.is_empty() {
        return random_state(outputs, rng);
    }
    let mut all = inputs.clone();
    all.extend(outputs.iter().cloned());
    let g = random_positive(&all, rng)?;
    Ok(trace_normalize(vec![g], &outputs)?.remove(0))
}

/// Random trace-preserving instrument with full-rank elements.
pub fn random_instrument(
    party: &str,
    quantum_inputs: Vec<SystemLabel>,
    input: Option<SystemLabel>,
    output: Option<SystemLabel>,
    classical_inputs: usize,
    outcomes: usize,
    rng: &mut impl Rng,
) -> Result<Instrument> {
    let mut labels = quantum_inputs.clone();
    labels.extend(input.iter().cloned());
    labels.extend(output.iter().cloned());
    let out: Vec<SystemLabel> = output.iter().cloned().collect();
    let mut rows = Vec::with_capacity(classical_inputs);
    for _ in 0..classical_inputs {
        let raw = (0..outcomes).map(|_| random_positive(&labels, rng)).collect::<Result<Vec<_>>>()?;
        rows.push(trace_normalize(raw, &out)?);
    }
    Instrument::new(party, quantum_inputs, input, output, rows)
}

/// Process compatible with the given order: a chain of random channels
/// with a `memory`-dimensional side system passed from party to party.
pub fn random_ordered_process(parties: &[Party], order: &[&str], memory: usize, rng: &mut impl Rng) -> Result<ProcessMatrix> {
    let find = |n: &str| {
        parties
            .iter()
            .find(|p| p.name == n)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown party `{}` in order", n)))
    };
    if order.len() != parties.len() {
        return Err(Error::InvalidArgument("order must list every party".into()));
    }
    let mem = |k: usize| SystemLabel::new(format!("_mem{}", k), memory);
    let first = find(order[0])?;
    let mut outs: Vec<SystemLabel> = first.input.iter().cloned().collect();
    if order.len() > 1 {
        outs.push(mem(0));
    }
    let mut w = random_state(outs, rng)?;
    for k in 0..order.len() - 1 {
        let here = find(order[k])?;
        let next = find(order[k + 1])?;
        let mut ins: Vec<SystemLabel> = here.output.iter().cloned().collect();
        ins.push(mem(k));
        let mut outs: Vec<SystemLabel> = next.input.iter().cloned().collect();
        if k + 2 < order.len() {
            outs.push(mem(k + 1));
        }
        let c = random_channel(ins, outs, rng)?;
        w = w.link(&c)?;
    }
    let last = find(order[order.len() - 1])?;
    if let Some(o) = &last.output {
        w = w.tensor(&LabeledOperator::identity(vec![o.clone()])?)?;
    }
    let canon: Vec<String> = parties.iter().flat_map(|p| p.labels()).map(|l| l.name).collect();
    let canon: Vec<&str> = canon.iter().map(|s| s.as_str()).collect();
    ProcessMatrix::new(w.permuted(&canon)?, parties.to_vec())
}

/// Random convex mixture of ordered processes, one per listed order.
pub fn random_separable_process(parties: &[Party], orders: &[Vec<&str>], memory: usize, rng: &mut impl Rng) -> Result<ProcessMatrix> {
    let weights: Vec<f64> = orders.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc: Option<LabeledOperator> = None;
    for (o, wt) in orders.iter().zip(&weights) {
        let w = random_ordered_process(parties, o, memory, rng)?;
        let term = w.op().scale(wt / total);
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term)?,
        });
    }
    let op = acc.ok_or_else(|| Error::InvalidArgument("no orders given".into()))?;
    ProcessMatrix::new(op, parties.to_vec())
}

/// Valid process near white noise: `1° + λ K` with `K` a random traceless
/// element of the valid subspace, `λ` chosen to keep the result positive.
pub fn random_valid_process(parties: &[Party], rng: &mut impl Rng) -> Result<ProcessMatrix> {
    let labels: Vec<SystemLabel> = parties.iter().flat_map(|p| p.labels()).collect();
    let d: usize = labels.iter().map(|l| l.dim).product();
    let g = ginibre(d, rng);
    let h = LabeledOperator::new(labels.clone(), (&g + g.adjoint()) * C64::new(0.5, 0.0))?;
    let tmpl = ProcessMatrix::new(LabeledOperator::identity(labels.clone())?, parties.to_vec())?;
    let k = tmpl.project_valid(&h)?;
    let k = k.sub(&LabeledOperator::identity(labels.clone())?.scale(k.trace().re / d as f64))?;
    let d_out = tmpl.output_dim_product() as f64;
    let noise = LabeledOperator::identity(labels)?.scale(d_out / d as f64);
    let spread = eigh(k.matrix()).0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lambda = if spread > 0.0 { rng.gen_range(0.2..0.9) * (d_out / d as f64) / spread } else { 0.0 };
    ProcessMatrix::new(noise.add(&k.scale(lambda))?, parties.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{ordered_process_check, validate_process_matrix};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bipartite() -> Vec<Party> {
        vec![Party::qubits("A"), Party::qubits("B")]
    }

    #[test]
    fn random_channel_is_cptp() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_channel(vec![SystemLabel::new("X", 2)], vec![SystemLabel::new("Y", 3)], &mut rng).unwrap();
        assert!(c.min_eigenvalue() > -1e-12);
        let r = c.partial_trace(&["Y"]).unwrap();
        assert!(r.max_abs_diff(&LabeledOperator::identity(vec![SystemLabel::new("X", 2)]).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn ordered_processes_satisfy_their_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_ordered_process(&bipartite(), &["A", "B"], 2, &mut rng).unwrap();
        assert!(validate_process_matrix(&w).unwrap().valid);
        assert!(ordered_process_check(&w, &["A", "B"]).unwrap());
        assert!(!ordered_process_check(&w, &["B", "A"]).unwrap());
    }

    #[test]
    fn four_party_ordered_process() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let parties = crate::process::switch::switch_parties();
        let w = random_ordered_process(&parties, &["P", "B", "A", "F"], 2, &mut rng).unwrap();
        assert!(validate_process_matrix(&w).unwrap().valid);
        assert!(ordered_process_check(&w, &["P", "B", "A", "F"]).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn mixtures_stay_valid(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_separable_process(&bipartite(), &[vec!["A", "B"], vec!["B", "A"]], 2, &mut rng).unwrap();
            let rep = validate_process_matrix(&w).unwrap();
            prop_assert!(rep.valid, "{:?}", rep);
        }

        #[test]
        fn random_valid_processes_are_valid(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_valid_process(&bipartite(), &mut rng).unwrap();
            let rep = validate_process_matrix(&w).unwrap();
            prop_assert!(rep.valid, "{:?}", rep);
        }

        #[test]
        fn depolarizing_keeps_validity(seed in any::<u64>(), r in 0.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_valid_process(&bipartite(), &mut rng).unwrap();
            let n = crate::process::depolarize(&w, r).unwrap();
            let rep = validate_process_matrix(&n).unwrap();
            prop_assert!(rep.valid);
            prop_assert!((rep.trace - 4.0).abs() < 1e-9);
        }
    }
}
